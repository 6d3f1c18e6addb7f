//! Executable process definitions for a BPMN 2.0 subset.
//!
//! Supported elements: start events (plain or timer), end events, user
//! tasks, service tasks, exclusive and parallel gateways, and embedded
//! sub-processes. Lanes are read only to assign user-task roles.

mod timer;
mod validate;
mod write;
mod xml;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::expr::ConditionExpression;
use crate::role::Role;
use crate::value::{Value, ValueType};

pub use timer::{CycleSpec, IsoDuration, TimerSpec};
pub use validate::{validate_connectors, Violation};
pub use write::serialize_definition;
pub use xml::{parse_definition, AGRI_NS, BPMN_NS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormField {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ValueType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Where a service-task input parameter takes its value from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Variable(String),
    Literal(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMapping {
    pub param: String,
    pub source: InputSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputMapping {
    pub output: String,
    pub variable: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    StartEvent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timer: Option<TimerSpec>,
    },
    EndEvent,
    UserTask {
        candidate_role: Role,
        form_fields: Vec<FormField>,
    },
    ServiceTask {
        connector: String,
        inputs: Vec<InputMapping>,
        outputs: Vec<OutputMapping>,
    },
    ExclusiveGateway {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default_flow: Option<String>,
    },
    ParallelGateway,
    SubProcess {
        nodes: Vec<FlowNode>,
        flows: Vec<SequenceFlow>,
    },
}

impl NodeKind {
    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::StartEvent { timer: None } => "startEvent",
            NodeKind::StartEvent { timer: Some(_) } => "timerStartEvent",
            NodeKind::EndEvent => "endEvent",
            NodeKind::UserTask { .. } => "userTask",
            NodeKind::ServiceTask { .. } => "serviceTask",
            NodeKind::ExclusiveGateway { .. } => "exclusiveGateway",
            NodeKind::ParallelGateway => "parallelGateway",
            NodeKind::SubProcess { .. } => "subProcess",
        }
    }

    /// Tasks and sub-processes; the units counted as work in progress.
    pub fn is_activity(&self) -> bool {
        matches!(
            self,
            NodeKind::UserTask { .. } | NodeKind::ServiceTask { .. } | NodeKind::SubProcess { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub kind: NodeKind,
}

impl FlowNode {
    pub fn display_name(&self) -> &str {
        if self.name.is_empty() {
            &self.id
        } else {
            &self.name
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFlow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionExpression>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDefinition {
    pub id: String,
    pub name: String,
    /// Assigned at deployment; 0 for a definition that was only parsed.
    pub version: u32,
    pub nodes: Vec<FlowNode>,
    pub flows: Vec<SequenceFlow>,
    pub start_nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DefinitionError {
    #[error("XML syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("invalid process definition: {}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl DefinitionError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            DefinitionError::Invalid(v) => v,
            DefinitionError::Syntax { .. } => &[],
        }
    }
}

/// A node as seen by the engine: where it lives and how it connects.
#[derive(Debug, Clone)]
pub struct NodeInfo {
    pub node: FlowNode,
    /// Enclosing sub-process id, `None` at the top level.
    pub scope: Option<String>,
    /// Outgoing flow ids in document order.
    pub outgoing: Vec<String>,
    pub incoming: Vec<String>,
}

/// Flattened lookup structure over a definition and its sub-processes.
#[derive(Debug, Clone)]
pub struct Graph {
    definition: Arc<ProcessDefinition>,
    nodes: BTreeMap<String, NodeInfo>,
    flows: BTreeMap<String, SequenceFlow>,
    /// Start event ids per scope, in document order.
    starts: BTreeMap<Option<String>, Vec<String>>,
}

impl Graph {
    pub fn new(definition: Arc<ProcessDefinition>) -> Graph {
        let mut g = Graph {
            definition: definition.clone(),
            nodes: BTreeMap::new(),
            flows: BTreeMap::new(),
            starts: BTreeMap::new(),
        };
        g.index(&definition.nodes, &definition.flows, None);
        g
    }

    fn index(&mut self, nodes: &[FlowNode], flows: &[SequenceFlow], scope: Option<String>) {
        for node in nodes {
            if matches!(node.kind, NodeKind::StartEvent { .. }) {
                self.starts.entry(scope.clone()).or_default().push(node.id.clone());
            }
            self.nodes.insert(
                node.id.clone(),
                NodeInfo {
                    node: node.clone(),
                    scope: scope.clone(),
                    outgoing: Vec::new(),
                    incoming: Vec::new(),
                },
            );
            if let NodeKind::SubProcess { nodes, flows } = &node.kind {
                self.index(nodes, flows, Some(node.id.clone()));
            }
        }
        for flow in flows {
            if let Some(src) = self.nodes.get_mut(&flow.source) {
                src.outgoing.push(flow.id.clone());
            }
            if let Some(dst) = self.nodes.get_mut(&flow.target) {
                dst.incoming.push(flow.id.clone());
            }
            self.flows.insert(flow.id.clone(), flow.clone());
        }
    }

    pub fn definition(&self) -> &Arc<ProcessDefinition> {
        &self.definition
    }

    pub fn node(&self, id: &str) -> Option<&NodeInfo> {
        self.nodes.get(id)
    }

    pub fn flow(&self, id: &str) -> Option<&SequenceFlow> {
        self.flows.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeInfo> {
        self.nodes.values()
    }

    pub fn starts(&self, scope: Option<&str>) -> &[String] {
        self.starts
            .get(&scope.map(str::to_string))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn outgoing(&self, node: &str) -> impl Iterator<Item = &SequenceFlow> {
        self.nodes
            .get(node)
            .into_iter()
            .flat_map(|n| n.outgoing.iter())
            .filter_map(|f| self.flows.get(f))
    }

    pub fn sub_process_count(&self) -> usize {
        self.nodes
            .values()
            .filter(|n| matches!(n.node.kind, NodeKind::SubProcess { .. }))
            .count()
    }

    /// Service tasks' connector kinds, deduplicated.
    pub fn connectors(&self) -> BTreeSet<&str> {
        self.nodes
            .values()
            .filter_map(|n| match &n.node.kind {
                NodeKind::ServiceTask { connector, .. } => Some(connector.as_str()),
                _ => None,
            })
            .collect()
    }
}

impl ProcessDefinition {
    pub fn graph(self: &Arc<Self>) -> Graph {
        Graph::new(self.clone())
    }

    /// Top-level timer start events.
    pub fn timer_starts(&self) -> impl Iterator<Item = (&FlowNode, &TimerSpec)> {
        self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::StartEvent { timer: Some(t) } => Some((n, t)),
            _ => None,
        })
    }

    /// Every node, including those nested in sub-processes, depth first.
    pub fn all_nodes(&self) -> Vec<&FlowNode> {
        fn walk<'a>(nodes: &'a [FlowNode], out: &mut Vec<&'a FlowNode>) {
            for n in nodes {
                out.push(n);
                if let NodeKind::SubProcess { nodes, .. } = &n.kind {
                    walk(nodes, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut out);
        out
    }
}

impl fmt::Display for ProcessDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} v{} ({})", self.id, self.version, self.name)
    }
}

/// Re-runs the structural checks on a definition built in code.
pub fn validate_definition(def: &ProcessDefinition) -> Result<(), DefinitionError> {
    let v = validate::structural(def);
    if v.is_empty() {
        Ok(())
    } else {
        Err(DefinitionError::Invalid(v))
    }
}
