use std::io;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;

use super::xml::{AGRI_NS, BPMN_NS};
use super::{FlowNode, InputSource, NodeKind, ProcessDefinition, SequenceFlow, TimerSpec};

type W = Writer<Vec<u8>>;

/// Emits BPMN XML that parses back to an equivalent definition.
pub fn serialize_definition(def: &ProcessDefinition) -> Vec<u8> {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    write_document(&mut w, def).expect("writing to a Vec cannot fail");
    let mut out = w.into_inner();
    out.push(b'\n');
    out
}

fn write_document(w: &mut W, def: &ProcessDefinition) -> io::Result<()> {
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
    let root = BytesStart::new("bpmn:definitions").with_attributes([
        ("xmlns:bpmn", BPMN_NS),
        ("xmlns:agri", AGRI_NS),
        ("id", "definitions"),
        ("targetNamespace", "https://agriflow.dev/processes"),
    ]);
    w.write_event(Event::Start(root))?;
    let process = BytesStart::new("bpmn:process").with_attributes([
        ("id", def.id.as_str()),
        ("name", def.name.as_str()),
        ("isExecutable", "true"),
    ]);
    w.write_event(Event::Start(process))?;
    write_scope(w, &def.nodes, &def.flows)?;
    w.write_event(Event::End(BytesEnd::new("bpmn:process")))?;
    w.write_event(Event::End(BytesEnd::new("bpmn:definitions")))
}

fn write_scope(w: &mut W, nodes: &[FlowNode], flows: &[SequenceFlow]) -> io::Result<()> {
    for node in nodes {
        write_node(w, node)?;
    }
    for flow in flows {
        write_flow(w, flow)?;
    }
    Ok(())
}

fn start<'a>(tag: &'a str, node: &'a FlowNode) -> BytesStart<'a> {
    let mut el = BytesStart::new(tag).with_attributes([("id", node.id.as_str())]);
    if !node.name.is_empty() {
        el.push_attribute(("name", node.name.as_str()));
    }
    el
}

fn text_element(w: &mut W, tag: &str, text: &str) -> io::Result<()> {
    w.write_event(Event::Start(BytesStart::new(tag)))?;
    w.write_event(Event::Text(BytesText::new(text)))?;
    w.write_event(Event::End(BytesEnd::new(tag)))
}

fn write_node(w: &mut W, node: &FlowNode) -> io::Result<()> {
    match &node.kind {
        NodeKind::StartEvent { timer } => {
            let el = start("bpmn:startEvent", node);
            let Some(timer) = timer else {
                return w.write_event(Event::Empty(el));
            };
            w.write_event(Event::Start(el))?;
            w.write_event(Event::Start(BytesStart::new("bpmn:timerEventDefinition")))?;
            let tag = match timer {
                TimerSpec::Cycle { .. } => "bpmn:timeCycle",
                TimerSpec::Date(_) => "bpmn:timeDate",
            };
            text_element(w, tag, &timer.text())?;
            w.write_event(Event::End(BytesEnd::new("bpmn:timerEventDefinition")))?;
            w.write_event(Event::End(BytesEnd::new("bpmn:startEvent")))
        }
        NodeKind::EndEvent => w.write_event(Event::Empty(start("bpmn:endEvent", node))),
        NodeKind::ParallelGateway => {
            w.write_event(Event::Empty(start("bpmn:parallelGateway", node)))
        }
        NodeKind::ExclusiveGateway { default_flow } => {
            let mut el = start("bpmn:exclusiveGateway", node);
            if let Some(d) = default_flow {
                el.push_attribute(("default", d.as_str()));
            }
            w.write_event(Event::Empty(el))
        }
        NodeKind::UserTask {
            candidate_role,
            form_fields,
        } => {
            let mut el = start("bpmn:userTask", node);
            el.push_attribute(("agri:candidateRole", candidate_role.as_str()));
            if form_fields.is_empty() {
                return w.write_event(Event::Empty(el));
            }
            w.write_event(Event::Start(el))?;
            w.write_event(Event::Start(BytesStart::new("bpmn:extensionElements")))?;
            for f in form_fields {
                let mut field = BytesStart::new("agri:formField").with_attributes([
                    ("name", f.name.as_str()),
                    ("type", f.ty.as_str()),
                    ("required", if f.required { "true" } else { "false" }),
                ]);
                if let Some(label) = &f.label {
                    field.push_attribute(("label", label.as_str()));
                }
                w.write_event(Event::Empty(field))?;
            }
            w.write_event(Event::End(BytesEnd::new("bpmn:extensionElements")))?;
            w.write_event(Event::End(BytesEnd::new("bpmn:userTask")))
        }
        NodeKind::ServiceTask {
            connector,
            inputs,
            outputs,
        } => {
            let mut el = start("bpmn:serviceTask", node);
            el.push_attribute(("agri:connector", connector.as_str()));
            if inputs.is_empty() && outputs.is_empty() {
                return w.write_event(Event::Empty(el));
            }
            w.write_event(Event::Start(el))?;
            w.write_event(Event::Start(BytesStart::new("bpmn:extensionElements")))?;
            for input in inputs {
                let mut i = BytesStart::new("agri:input").with_attributes([("param", input.param.as_str())]);
                match &input.source {
                    InputSource::Variable(v) => i.push_attribute(("variable", v.as_str())),
                    InputSource::Literal(v) => {
                        i.push_attribute(("value", v.to_string().as_str()));
                        i.push_attribute(("type", v.value_type().as_str()));
                    }
                }
                w.write_event(Event::Empty(i))?;
            }
            for output in outputs {
                let o = BytesStart::new("agri:output").with_attributes([
                    ("name", output.output.as_str()),
                    ("variable", output.variable.as_str()),
                ]);
                w.write_event(Event::Empty(o))?;
            }
            w.write_event(Event::End(BytesEnd::new("bpmn:extensionElements")))?;
            w.write_event(Event::End(BytesEnd::new("bpmn:serviceTask")))
        }
        NodeKind::SubProcess { nodes, flows } => {
            w.write_event(Event::Start(start("bpmn:subProcess", node)))?;
            write_scope(w, nodes, flows)?;
            w.write_event(Event::End(BytesEnd::new("bpmn:subProcess")))
        }
    }
}

fn write_flow(w: &mut W, flow: &SequenceFlow) -> io::Result<()> {
    let mut el = BytesStart::new("bpmn:sequenceFlow").with_attributes([
        ("id", flow.id.as_str()),
        ("sourceRef", flow.source.as_str()),
        ("targetRef", flow.target.as_str()),
    ]);
    if let Some(name) = &flow.name {
        el.push_attribute(("name", name.as_str()));
    }
    let Some(cond) = &flow.condition else {
        return w.write_event(Event::Empty(el));
    };
    w.write_event(Event::Start(el))?;
    text_element(w, "bpmn:conditionExpression", cond.source())?;
    w.write_event(Event::End(BytesEnd::new("bpmn:sequenceFlow")))
}
