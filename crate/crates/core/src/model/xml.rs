use std::collections::BTreeMap;

use roxmltree::{Document, Node};

use super::validate::structural;
use super::{
    DefinitionError, FlowNode, FormField, InputMapping, InputSource, NodeKind, OutputMapping,
    ProcessDefinition, SequenceFlow, TimerSpec, Violation,
};
use crate::expr::ConditionExpression;
use crate::role::Role;
use crate::value::{Value, ValueType};

pub const BPMN_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
/// Namespace for roles, forms and connector mappings.
pub const AGRI_NS: &str = "https://agriflow.dev/schema/bpmn/1";

/// Parses BPMN XML into a validated definition, reporting every violation found.
pub fn parse_definition(xml: &[u8]) -> Result<ProcessDefinition, DefinitionError> {
    let text = std::str::from_utf8(xml).map_err(|e| {
        let (line, column) = position_of(xml, e.valid_up_to());
        DefinitionError::Syntax {
            line,
            column,
            message: format!("invalid UTF-8: {e}"),
        }
    })?;
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        DefinitionError::Syntax {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;

    let mut cx = Cx {
        doc: &doc,
        violations: Vec::new(),
        lane_roles: BTreeMap::new(),
    };
    let root = doc.root_element();
    if !cx.is_bpmn(root, "definitions") {
        cx.unsupported(root);
        return Err(DefinitionError::Invalid(cx.violations));
    }

    let mut processes = Vec::new();
    for child in root.children().filter(Node::is_element) {
        if cx.is_bpmn(child, "process") {
            processes.push(child);
        } else if !cx.ignorable_definitions_child(child) {
            cx.unsupported(child);
        }
    }
    let process = match processes.as_slice() {
        [] => {
            cx.violations.push(Violation::NoProcess);
            return Err(DefinitionError::Invalid(cx.violations));
        }
        [p] => *p,
        [p, ..] => {
            cx.violations.push(Violation::MultipleProcesses);
            *p
        }
    };

    cx.read_lanes(process);
    let id = cx.required(process, "id").unwrap_or_default();
    let name = process.attribute("name").unwrap_or(&id).to_string();
    let (nodes, flows) = cx.read_scope(process);
    let start_nodes = nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::StartEvent { .. }))
        .map(|n| n.id.clone())
        .collect();
    let def = ProcessDefinition {
        id,
        name,
        version: 0,
        nodes,
        flows,
        start_nodes,
    };

    let mut violations = cx.violations;
    violations.extend(structural(&def));
    if violations.is_empty() {
        Ok(def)
    } else {
        Err(DefinitionError::Invalid(violations))
    }
}

fn position_of(bytes: &[u8], offset: usize) -> (u32, u32) {
    let before = &bytes[..offset.min(bytes.len())];
    let line = before.iter().filter(|b| **b == b'\n').count() as u32 + 1;
    let col = before.iter().rev().take_while(|b| **b != b'\n').count() as u32 + 1;
    (line, col)
}

struct Cx<'a, 'input> {
    doc: &'a Document<'input>,
    violations: Vec<Violation>,
    lane_roles: BTreeMap<String, String>,
}

impl<'a, 'input> Cx<'a, 'input> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn is_bpmn(&self, node: Node, local: &str) -> bool {
        node.tag_name().namespace() == Some(BPMN_NS) && node.tag_name().name() == local
    }

    fn is_agri(&self, node: Node, local: &str) -> bool {
        node.tag_name().namespace() == Some(AGRI_NS) && node.tag_name().name() == local
    }

    fn qualified(node: Node) -> String {
        match node.tag_name().namespace() {
            Some(BPMN_NS) => format!("bpmn:{}", node.tag_name().name()),
            Some(AGRI_NS) => format!("agri:{}", node.tag_name().name()),
            Some(ns) => format!("{{{ns}}}{}", node.tag_name().name()),
            None => node.tag_name().name().to_string(),
        }
    }

    fn unsupported(&mut self, node: Node) {
        self.violations.push(Violation::UnsupportedElement {
            element: Self::qualified(node),
            line: self.line(node),
        });
    }

    fn required(&mut self, node: Node, attr: &str) -> Option<String> {
        match node.attribute(attr) {
            Some(v) if !v.trim().is_empty() => Some(v.trim().to_string()),
            _ => {
                self.violations.push(Violation::MissingAttribute {
                    element: node.tag_name().name().to_string(),
                    attribute: attr.to_string(),
                    line: self.line(node),
                });
                None
            }
        }
    }

    fn invalid(&mut self, node: Node, attr: &str, message: String) {
        self.violations.push(Violation::InvalidAttribute {
            element: node.tag_name().name().to_string(),
            attribute: attr.to_string(),
            message,
            line: self.line(node),
        });
    }

    /// Diagram interchange, documentation and definitions-level metadata carry
    /// no execution semantics.
    fn ignorable_definitions_child(&self, node: Node) -> bool {
        let ns = node.tag_name().namespace();
        ns == Some("http://www.omg.org/spec/BPMN/20100524/DI")
            || self.is_bpmn(node, "documentation")
            || self.is_bpmn(node, "extensionElements")
    }

    fn ignorable_in_element(&self, node: Node) -> bool {
        self.is_bpmn(node, "documentation")
            || self.is_bpmn(node, "incoming")
            || self.is_bpmn(node, "outgoing")
    }

    fn read_lanes(&mut self, scope: Node) {
        let mut found = Vec::new();
        for set in scope.descendants().filter(|n| self.is_bpmn(*n, "laneSet")) {
            for lane in set.children().filter(|n| self.is_bpmn(*n, "lane")) {
                let Some(name) = lane.attribute("name") else { continue };
                for r in lane.children().filter(|n| self.is_bpmn(*n, "flowNodeRef")) {
                    if let Some(t) = r.text() {
                        found.push((t.trim().to_string(), name.to_string()));
                    }
                }
            }
        }
        self.lane_roles.extend(found);
    }

    fn read_scope(&mut self, scope: Node<'a, 'input>) -> (Vec<FlowNode>, Vec<SequenceFlow>) {
        let mut nodes = Vec::new();
        let mut flows = Vec::new();
        for el in scope.children().filter(Node::is_element) {
            if el.tag_name().namespace() != Some(BPMN_NS) {
                self.unsupported(el);
                continue;
            }
            let local = el.tag_name().name();
            match local {
                "laneSet" | "documentation" | "extensionElements" => {}
                "sequenceFlow" => {
                    if let Some(f) = self.read_flow(el) {
                        flows.push(f);
                    }
                }
                _ => {
                    if let Some(n) = self.read_node(el) {
                        nodes.push(n);
                    }
                }
            }
        }
        (nodes, flows)
    }

    fn read_flow(&mut self, el: Node) -> Option<SequenceFlow> {
        let id = self.required(el, "id");
        let source = self.required(el, "sourceRef");
        let target = self.required(el, "targetRef");
        let mut condition = None;
        for child in el.children().filter(Node::is_element) {
            if self.is_bpmn(child, "conditionExpression") {
                let text = child.text().unwrap_or("").trim().to_string();
                match ConditionExpression::parse(&text) {
                    Ok(c) => condition = Some(c),
                    Err(e) => self.violations.push(Violation::BadCondition {
                        flow: id.clone().unwrap_or_default(),
                        message: e.to_string(),
                    }),
                }
            } else if !self.ignorable_in_element(child) && !self.is_bpmn(child, "extensionElements") {
                self.unsupported(child);
            }
        }
        Some(SequenceFlow {
            id: id?,
            name: el.attribute("name").map(str::to_string),
            source: source?,
            target: target?,
            condition,
        })
    }

    fn read_node(&mut self, el: Node<'a, 'input>) -> Option<FlowNode> {
        let local = el.tag_name().name();
        let kind = match local {
            "startEvent" => NodeKind::StartEvent {
                timer: self.read_start_trigger(el),
            },
            "endEvent" => {
                self.plain_children(el);
                NodeKind::EndEvent
            }
            "userTask" => self.read_user_task(el),
            "serviceTask" => self.read_service_task(el),
            "exclusiveGateway" => {
                self.plain_children(el);
                NodeKind::ExclusiveGateway {
                    default_flow: el.attribute("default").map(str::to_string),
                }
            }
            "parallelGateway" => {
                self.plain_children(el);
                NodeKind::ParallelGateway
            }
            "subProcess" => {
                if el.attribute("triggeredByEvent") == Some("true") {
                    self.unsupported(el);
                    return None;
                }
                let (nodes, flows) = self.read_scope(el);
                NodeKind::SubProcess { nodes, flows }
            }
            _ => {
                self.unsupported(el);
                return None;
            }
        };
        let id = self.required(el, "id")?;
        Some(FlowNode {
            id,
            name: el.attribute("name").unwrap_or("").to_string(),
            kind,
        })
    }

    fn plain_children(&mut self, el: Node) {
        for child in el.children().filter(Node::is_element) {
            if !self.ignorable_in_element(child) && !self.is_bpmn(child, "extensionElements") {
                self.unsupported(child);
            }
        }
    }

    fn read_start_trigger(&mut self, el: Node) -> Option<TimerSpec> {
        let node_id = el.attribute("id").unwrap_or("").to_string();
        let mut timer = None;
        for child in el.children().filter(Node::is_element) {
            if self.ignorable_in_element(child) || self.is_bpmn(child, "extensionElements") {
                continue;
            }
            if !self.is_bpmn(child, "timerEventDefinition") {
                self.unsupported(child);
                continue;
            }
            for def in child.children().filter(Node::is_element) {
                let text = def.text().unwrap_or("").trim();
                let parsed = if self.is_bpmn(def, "timeCycle") {
                    TimerSpec::cycle(text)
                } else if self.is_bpmn(def, "timeDate") {
                    TimerSpec::date(text)
                } else {
                    self.unsupported(def);
                    continue;
                };
                match parsed {
                    Ok(t) => timer = Some(t),
                    Err(message) => self.violations.push(Violation::BadTimer {
                        node: node_id.clone(),
                        message,
                    }),
                }
            }
        }
        timer
    }

    /// Foreign extension content is skipped; only our namespace is read.
    fn extensions(&mut self, el: Node<'a, 'input>) -> Vec<Node<'a, 'input>> {
        let mut out = Vec::new();
        for child in el.children().filter(Node::is_element) {
            if self.is_bpmn(child, "extensionElements") {
                out.extend(
                    child
                        .children()
                        .filter(|n| n.is_element() && n.tag_name().namespace() == Some(AGRI_NS)),
                );
            } else if !self.ignorable_in_element(child) {
                self.unsupported(child);
            }
        }
        out
    }

    fn read_user_task(&mut self, el: Node<'a, 'input>) -> NodeKind {
        let id = el.attribute("id").unwrap_or("").to_string();
        let role_text = el
            .attribute((AGRI_NS, "candidateRole"))
            .map(str::to_string)
            .or_else(|| self.lane_roles.get(&id).cloned());
        let candidate_role = match role_text {
            None => {
                self.violations.push(Violation::MissingRole { node: id.clone() });
                Role::FarmManager
            }
            Some(text) => text.parse().unwrap_or_else(|_| {
                self.violations.push(Violation::UnknownRole {
                    node: id.clone(),
                    role: text.clone(),
                });
                Role::FarmManager
            }),
        };
        let mut form_fields = Vec::new();
        for ext in self.extensions(el) {
            if !self.is_agri(ext, "formField") {
                self.unsupported(ext);
                continue;
            }
            let name = self.required(ext, "name");
            let ty = self.value_type(ext);
            let required = match ext.attribute("required").unwrap_or("false") {
                "true" => true,
                "false" => false,
                other => {
                    self.invalid(ext, "required", format!("expected true or false, got '{other}'"));
                    false
                }
            };
            if let (Some(name), Some(ty)) = (name, ty) {
                form_fields.push(FormField {
                    name,
                    ty,
                    required,
                    label: ext.attribute("label").map(str::to_string),
                });
            }
        }
        NodeKind::UserTask {
            candidate_role,
            form_fields,
        }
    }

    fn value_type(&mut self, ext: Node) -> Option<ValueType> {
        let text = self.required(ext, "type")?;
        match text.parse() {
            Ok(t) => Some(t),
            Err(message) => {
                self.invalid(ext, "type", message);
                None
            }
        }
    }

    fn read_service_task(&mut self, el: Node<'a, 'input>) -> NodeKind {
        let connector = el
            .attribute((AGRI_NS, "connector"))
            .map(str::to_string)
            .unwrap_or_else(|| {
                self.violations.push(Violation::MissingAttribute {
                    element: "serviceTask".into(),
                    attribute: "agri:connector".into(),
                    line: self.line(el),
                });
                String::new()
            });
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for ext in self.extensions(el) {
            if self.is_agri(ext, "input") {
                let Some(param) = self.required(ext, "param") else { continue };
                let source = match (ext.attribute("variable"), ext.attribute("value")) {
                    (Some(var), None) => InputSource::Variable(var.to_string()),
                    (None, Some(raw)) => {
                        let Some(ty) = self.value_type(ext) else { continue };
                        match Value::parse_as(raw, ty) {
                            Ok(v) => InputSource::Literal(v),
                            Err(message) => {
                                self.invalid(ext, "value", message);
                                continue;
                            }
                        }
                    }
                    _ => {
                        self.invalid(
                            ext,
                            "variable",
                            "exactly one of 'variable' or 'value' is required".into(),
                        );
                        continue;
                    }
                };
                inputs.push(InputMapping { param, source });
            } else if self.is_agri(ext, "output") {
                let output = self.required(ext, "name");
                let variable = self.required(ext, "variable");
                if let (Some(output), Some(variable)) = (output, variable) {
                    outputs.push(OutputMapping { output, variable });
                }
            } else {
                self.unsupported(ext);
            }
        }
        NodeKind::ServiceTask {
            connector,
            inputs,
            outputs,
        }
    }
}
