use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{FlowNode, NodeKind, ProcessDefinition, SequenceFlow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    UnsupportedElement { element: String, line: u32 },
    MissingAttribute { element: String, attribute: String, line: u32 },
    InvalidAttribute { element: String, attribute: String, message: String, line: u32 },
    NoProcess,
    MultipleProcesses,
    DuplicateId { id: String },
    DanglingReference { flow: String, reference: String },
    CrossScopeFlow { flow: String },
    NoStartEvent { scope: String },
    SubProcessStart { subprocess: String, found: usize },
    SubProcessWithoutEnd { subprocess: String },
    TimerInSubProcess { node: String },
    StartHasIncoming { node: String },
    EndHasOutgoing { node: String },
    DeadEnd { node: String },
    SingleOutgoing { node: String, found: usize },
    Unreachable { node: String },
    MissingCondition { gateway: String, flow: String },
    DefaultNotOutgoing { gateway: String, flow: String },
    ConditionalDefault { flow: String },
    ConditionOutsideGateway { flow: String },
    BadCondition { flow: String, message: String },
    MissingRole { node: String },
    UnknownRole { node: String, role: String },
    BadTimer { node: String, message: String },
    DuplicateFormField { node: String, field: String },
    UnknownConnector { node: String, connector: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            UnsupportedElement { element, line } => {
                write!(f, "unsupported element '{element}' (line {line})")
            }
            MissingAttribute { element, attribute, line } => {
                write!(f, "<{element}> is missing attribute '{attribute}' (line {line})")
            }
            InvalidAttribute { element, attribute, message, line } => {
                write!(f, "<{element}> attribute '{attribute}': {message} (line {line})")
            }
            NoProcess => f.write_str("document contains no <process>"),
            MultipleProcesses => f.write_str("document contains more than one <process>"),
            DuplicateId { id } => write!(f, "duplicate id '{id}'"),
            DanglingReference { flow, reference } => {
                write!(f, "sequence flow '{flow}' references unknown node '{reference}'")
            }
            CrossScopeFlow { flow } => {
                write!(f, "sequence flow '{flow}' crosses a sub-process boundary")
            }
            NoStartEvent { scope } => write!(f, "{scope} has no start event"),
            SubProcessStart { subprocess, found } => write!(
                f,
                "sub-process '{subprocess}' must contain exactly one plain start event, found {found}"
            ),
            SubProcessWithoutEnd { subprocess } => {
                write!(f, "sub-process '{subprocess}' has no end event")
            }
            TimerInSubProcess { node } => {
                write!(f, "timer start event '{node}' inside a sub-process")
            }
            StartHasIncoming { node } => write!(f, "start event '{node}' has incoming flows"),
            EndHasOutgoing { node } => write!(f, "end event '{node}' has outgoing flows"),
            DeadEnd { node } => write!(f, "node '{node}' has no outgoing flow"),
            SingleOutgoing { node, found } => write!(
                f,
                "node '{node}' must have exactly one outgoing flow, found {found}"
            ),
            Unreachable { node } => write!(f, "node '{node}' is unreachable from any start event"),
            MissingCondition { gateway, flow } => write!(
                f,
                "flow '{flow}' leaving exclusive gateway '{gateway}' has neither a condition nor default status"
            ),
            DefaultNotOutgoing { gateway, flow } => write!(
                f,
                "default flow '{flow}' of gateway '{gateway}' is not one of its outgoing flows"
            ),
            ConditionalDefault { flow } => write!(f, "default flow '{flow}' carries a condition"),
            ConditionOutsideGateway { flow } => write!(
                f,
                "flow '{flow}' has a condition but does not leave an exclusive gateway"
            ),
            BadCondition { flow, message } => write!(f, "condition on flow '{flow}': {message}"),
            MissingRole { node } => write!(f, "user task '{node}' has no candidate role"),
            UnknownRole { node, role } => write!(f, "user task '{node}': unknown role '{role}'"),
            BadTimer { node, message } => write!(f, "timer on '{node}': {message}"),
            DuplicateFormField { node, field } => {
                write!(f, "user task '{node}' declares form field '{field}' twice")
            }
            UnknownConnector { node, connector } => write!(
                f,
                "service task '{node}' uses unregistered connector '{connector}'"
            ),
        }
    }
}

/// Every service task whose connector is absent from `registry`.
pub fn validate_connectors<S: AsRef<str>>(def: &ProcessDefinition, registry: &[S]) -> Vec<Violation> {
    let known: BTreeSet<&str> = registry.iter().map(AsRef::as_ref).collect();
    def.all_nodes()
        .into_iter()
        .filter_map(|n| match &n.kind {
            NodeKind::ServiceTask { connector, .. } if !known.contains(connector.as_str()) => {
                Some(Violation::UnknownConnector {
                    node: n.id.clone(),
                    connector: connector.clone(),
                })
            }
            _ => None,
        })
        .collect()
}

struct Scoped<'a> {
    node: &'a FlowNode,
    scope: Option<&'a str>,
}

/// Graph-level checks on an assembled definition.
pub(crate) fn structural(def: &ProcessDefinition) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut nodes: BTreeMap<&str, Scoped> = BTreeMap::new();
    let mut flows: Vec<(&SequenceFlow, Option<&str>)> = Vec::new();
    let mut seen_flow_ids = BTreeSet::new();
    collect(&def.nodes, &def.flows, None, &mut nodes, &mut flows, &mut out);
    for (flow, _) in &flows {
        if nodes.contains_key(flow.id.as_str()) || !seen_flow_ids.insert(flow.id.as_str()) {
            out.push(Violation::DuplicateId { id: flow.id.clone() });
        }
    }

    let mut outgoing: BTreeMap<&str, Vec<&SequenceFlow>> = BTreeMap::new();
    let mut incoming: BTreeMap<&str, usize> = BTreeMap::new();
    for (flow, scope) in &flows {
        let mut ok = true;
        for end in [&flow.source, &flow.target] {
            match nodes.get(end.as_str()) {
                None => {
                    ok = false;
                    out.push(Violation::DanglingReference {
                        flow: flow.id.clone(),
                        reference: end.clone(),
                    });
                }
                Some(s) if s.scope != *scope => {
                    ok = false;
                    out.push(Violation::CrossScopeFlow { flow: flow.id.clone() });
                }
                Some(_) => {}
            }
        }
        if ok {
            outgoing.entry(flow.source.as_str()).or_default().push(flow);
            *incoming.entry(flow.target.as_str()).or_default() += 1;
        }
        if flow.condition.is_some() {
            let from_xor = nodes
                .get(flow.source.as_str())
                .is_some_and(|s| matches!(s.node.kind, NodeKind::ExclusiveGateway { .. }));
            if !from_xor {
                out.push(Violation::ConditionOutsideGateway { flow: flow.id.clone() });
            }
        }
    }

    let top_starts = def
        .nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::StartEvent { .. }))
        .count();
    if top_starts == 0 {
        out.push(Violation::NoStartEvent {
            scope: format!("process '{}'", def.id),
        });
    }

    for (id, s) in &nodes {
        let outs = outgoing.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let ins = incoming.get(id).copied().unwrap_or(0);
        let node = s.node;
        match &node.kind {
            NodeKind::StartEvent { timer } => {
                if ins > 0 {
                    out.push(Violation::StartHasIncoming { node: node.id.clone() });
                }
                if timer.is_some() && s.scope.is_some() {
                    out.push(Violation::TimerInSubProcess { node: node.id.clone() });
                }
                single_outgoing(node, outs.len(), &mut out);
            }
            NodeKind::EndEvent => {
                if !outs.is_empty() {
                    out.push(Violation::EndHasOutgoing { node: node.id.clone() });
                }
            }
            NodeKind::UserTask { form_fields, .. } => {
                let mut names = BTreeSet::new();
                for field in form_fields {
                    if !names.insert(field.name.as_str()) {
                        out.push(Violation::DuplicateFormField {
                            node: node.id.clone(),
                            field: field.name.clone(),
                        });
                    }
                }
                single_outgoing(node, outs.len(), &mut out);
            }
            NodeKind::ServiceTask { .. } => single_outgoing(node, outs.len(), &mut out),
            NodeKind::SubProcess { nodes: children, .. } => {
                let plain = children
                    .iter()
                    .filter(|c| matches!(c.kind, NodeKind::StartEvent { .. }))
                    .count();
                if plain != 1 {
                    out.push(Violation::SubProcessStart {
                        subprocess: node.id.clone(),
                        found: plain,
                    });
                }
                if !children.iter().any(|c| matches!(c.kind, NodeKind::EndEvent)) {
                    out.push(Violation::SubProcessWithoutEnd {
                        subprocess: node.id.clone(),
                    });
                }
                single_outgoing(node, outs.len(), &mut out);
            }
            NodeKind::ParallelGateway => {
                if outs.is_empty() {
                    out.push(Violation::DeadEnd { node: node.id.clone() });
                }
            }
            NodeKind::ExclusiveGateway { default_flow } => {
                if outs.is_empty() {
                    out.push(Violation::DeadEnd { node: node.id.clone() });
                }
                if let Some(default) = default_flow {
                    match outs.iter().find(|f| &f.id == default) {
                        None => out.push(Violation::DefaultNotOutgoing {
                            gateway: node.id.clone(),
                            flow: default.clone(),
                        }),
                        Some(f) if f.condition.is_some() => {
                            out.push(Violation::ConditionalDefault { flow: f.id.clone() })
                        }
                        Some(_) => {}
                    }
                }
                if outs.len() >= 2 {
                    for f in outs {
                        if f.condition.is_none() && default_flow.as_ref() != Some(&f.id) {
                            out.push(Violation::MissingCondition {
                                gateway: node.id.clone(),
                                flow: f.id.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    // Reaching a sub-process makes its inner start event reachable.
    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = def
        .nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::StartEvent { .. }))
        .map(|n| n.id.as_str())
        .collect();
    while let Some(id) = queue.pop_front() {
        if !reached.insert(id) {
            continue;
        }
        if let Some(Scoped {
            node: FlowNode { kind: NodeKind::SubProcess { nodes: children, .. }, .. },
            ..
        }) = nodes.get(id)
        {
            for c in children {
                if matches!(c.kind, NodeKind::StartEvent { timer: None }) {
                    queue.push_back(&c.id);
                }
            }
        }
        for f in outgoing.get(id).into_iter().flatten() {
            queue.push_back(&f.target);
        }
    }
    for id in nodes.keys() {
        if !reached.contains(id) {
            out.push(Violation::Unreachable { node: id.to_string() });
        }
    }
    out
}

fn single_outgoing(node: &FlowNode, found: usize, out: &mut Vec<Violation>) {
    match found {
        1 => {}
        0 => out.push(Violation::DeadEnd { node: node.id.clone() }),
        _ => out.push(Violation::SingleOutgoing {
            node: node.id.clone(),
            found,
        }),
    }
}

fn collect<'a>(
    nodes: &'a [FlowNode],
    flows: &'a [SequenceFlow],
    scope: Option<&'a str>,
    index: &mut BTreeMap<&'a str, Scoped<'a>>,
    all_flows: &mut Vec<(&'a SequenceFlow, Option<&'a str>)>,
    out: &mut Vec<Violation>,
) {
    for node in nodes {
        if index.insert(&node.id, Scoped { node, scope }).is_some() {
            out.push(Violation::DuplicateId { id: node.id.clone() });
        }
        if let NodeKind::SubProcess { nodes, flows } = &node.kind {
            collect(nodes, flows, Some(&node.id), index, all_flows, out);
        }
    }
    all_flows.extend(flows.iter().map(|f| (f, scope)));
}
