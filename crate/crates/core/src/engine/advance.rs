use std::sync::Arc;

use super::state::is_join;
use super::*;
use crate::model::{Graph, InputSource};

impl Engine {
    /// Moves a token out of the activity it was parked at.
    pub(super) fn leave(&mut self, instance: InstanceId, token: TokenId) -> Result<()> {
        let graph = self.graph_of(instance)?;
        let node = self.state.instances[&instance].tokens[&token].node.clone();
        let flow = graph
            .outgoing(&node)
            .next()
            .map(|f| (f.id.clone(), f.target.clone()));
        match flow {
            Some((flow, to)) => self.emit(Event::TokenMoved {
                instance,
                token,
                from: node,
                flow,
                to,
            }),
            None => self.fail(instance, format!("node '{node}' has no outgoing flow")),
        }
        Ok(())
    }

    fn graph_of(&self, instance: InstanceId) -> Result<Arc<Graph>> {
        self.state
            .instance_graph(instance)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(format!("instance {instance}")))
    }

    fn running(&self, instance: InstanceId) -> bool {
        self.state.instances[&instance].status == InstanceStatus::Running
    }

    /// Advances every ready token until a full pass changes nothing. Tokens
    /// are visited in id order, so the outcome depends only on the state.
    pub(super) fn advance(&mut self, instance: InstanceId) -> Result<()> {
        let graph = self.graph_of(instance)?;
        while self.running(instance) {
            let ids: Vec<TokenId> = self.state.instances[&instance].tokens.keys().copied().collect();
            let mut progressed = false;
            for id in ids {
                if !self.running(instance) {
                    break;
                }
                let Some(token) = self.state.instances[&instance].tokens.get(&id).cloned() else {
                    continue;
                };
                if token.wait == Wait::Ready {
                    progressed |= self.step(&graph, instance, &token);
                }
            }
            if !progressed {
                break;
            }
        }
        let inst = &self.state.instances[&instance];
        if inst.status == InstanceStatus::Running && inst.tokens.is_empty() {
            self.emit(Event::InstanceCompleted { instance });
        }
        Ok(())
    }

    fn move_along(&mut self, instance: InstanceId, token: &Token, flow: &crate::model::SequenceFlow) {
        self.emit(Event::TokenMoved {
            instance,
            token: token.id,
            from: token.node.clone(),
            flow: flow.id.clone(),
            to: flow.target.clone(),
        });
    }

    fn step(&mut self, graph: &Graph, instance: InstanceId, token: &Token) -> bool {
        let Some(info) = graph.node(&token.node) else {
            self.fail(instance, format!("token at unknown node '{}'", token.node));
            return true;
        };
        match &info.node.kind {
            NodeKind::StartEvent { .. } => {
                match graph.outgoing(&token.node).next() {
                    Some(f) => self.move_along(instance, token, f),
                    None => self.fail(instance, format!("start event '{}' leads nowhere", token.node)),
                }
                true
            }
            NodeKind::EndEvent => {
                self.emit(Event::TokenConsumed {
                    instance,
                    token: token.id,
                    node: token.node.clone(),
                });
                if let Some(parent) = token.parent {
                    let siblings_left = self.state.instances[&instance]
                        .tokens
                        .values()
                        .any(|t| t.parent == Some(parent));
                    if !siblings_left {
                        let node = self.state.instances[&instance].tokens[&parent].node.clone();
                        self.emit(Event::SubprocessCompleted {
                            instance,
                            token: parent,
                            node,
                        });
                        let _ = self.leave(instance, parent);
                    }
                }
                true
            }
            NodeKind::UserTask {
                candidate_role,
                form_fields,
            } => {
                let task = self.next_task();
                let name = info.node.display_name().to_string();
                self.emit(Event::TaskCreated {
                    task,
                    instance,
                    token: token.id,
                    node: token.node.clone(),
                    name: name.clone(),
                    candidate_role: *candidate_role,
                    form_fields: form_fields.clone(),
                });
                let n = self.next_notification();
                self.emit(Event::NotificationEmitted {
                    notification: n,
                    instance: Some(instance),
                    recipient: Recipient::Role(*candidate_role),
                    severity: Severity::Info,
                    source: NotificationSource::Engine,
                    body: format!("New task: {name}"),
                });
                true
            }
            NodeKind::ServiceTask {
                connector, inputs, ..
            } => {
                let vars = &self.state.instances[&instance].variables;
                let mut resolved = VariableMap::new();
                let mut missing = None;
                for m in inputs {
                    let value = match &m.source {
                        InputSource::Literal(v) => Some(v.clone()),
                        InputSource::Variable(name) => vars.get(name).cloned(),
                    };
                    match value {
                        Some(v) => {
                            let _ = resolved.insert(m.param.clone(), v);
                        }
                        None => {
                            missing = Some(m);
                            break;
                        }
                    }
                }
                if let Some(m) = missing {
                    let var = match &m.source {
                        InputSource::Variable(v) => v.as_str(),
                        InputSource::Literal(_) => "",
                    };
                    self.fail(
                        instance,
                        format!(
                            "service task '{}': input '{}' needs unbound variable '{var}'",
                            token.node, m.param
                        ),
                    );
                    return true;
                }
                let job = self.next_job();
                let due = self.now;
                let max_attempts = self.retry.max_attempts;
                self.emit(Event::JobEnqueued {
                    job,
                    kind: JobKind::ServiceCall {
                        instance,
                        token: token.id,
                        node: token.node.clone(),
                        connector: connector.clone(),
                        inputs: resolved,
                    },
                    due_at: due,
                    max_attempts,
                });
                true
            }
            NodeKind::SubProcess { .. } => {
                self.emit(Event::SubprocessEntered {
                    instance,
                    token: token.id,
                    node: token.node.clone(),
                });
                match graph.starts(Some(&token.node)).first() {
                    Some(start) => {
                        let child = self.next_token();
                        self.emit(Event::TokenCreated {
                            instance,
                            token: child,
                            node: start.clone(),
                            parent: Some(token.id),
                            via: None,
                        });
                    }
                    None => self.fail(instance, format!("sub-process '{}' has no start", token.node)),
                }
                true
            }
            NodeKind::ExclusiveGateway { default_flow } => {
                let vars = &self.state.instances[&instance].variables;
                let mut chosen = None;
                let mut error = None;
                for f in graph.outgoing(&token.node) {
                    if Some(&f.id) == default_flow.as_ref() {
                        continue;
                    }
                    let Some(cond) = &f.condition else {
                        // A lone unconditional flow is simply followed.
                        chosen = Some(f);
                        break;
                    };
                    match cond.evaluate(vars) {
                        Ok(true) => {
                            chosen = Some(f);
                            break;
                        }
                        Ok(false) => {}
                        Err(e) => {
                            error = Some(format!("gateway '{}', flow '{}': {e}", token.node, f.id));
                            break;
                        }
                    }
                }
                if let Some(err) = error {
                    self.fail(instance, err);
                    return true;
                }
                let chosen = chosen.or_else(|| default_flow.as_ref().and_then(|d| graph.flow(d))).cloned();
                match chosen {
                    Some(f) => self.move_along(instance, token, &f),
                    None => self.fail(
                        instance,
                        format!("no viable flow at exclusive gateway '{}'", token.node),
                    ),
                }
                true
            }
            NodeKind::ParallelGateway => {
                if !is_join(graph, &token.node) {
                    self.fork(graph, instance, vec![token.id], token);
                    return true;
                }
                let tokens = &self.state.instances[&instance].tokens;
                let mut chosen = Vec::new();
                for flow in &info.incoming {
                    let arrived = tokens.values().find(|t| {
                        t.node == token.node
                            && t.parent == token.parent
                            && t.wait == Wait::Ready
                            && t.via.as_deref() == Some(flow)
                    });
                    match arrived {
                        Some(t) => chosen.push(t.id),
                        None => return false,
                    }
                }
                self.fork(graph, instance, chosen, token);
                true
            }
        }
    }

    /// Consumes `inputs` at a parallel gateway and emits one token per
    /// outgoing flow. A single input with a single outgoing flow just moves.
    fn fork(&mut self, graph: &Graph, instance: InstanceId, inputs: Vec<TokenId>, token: &Token) {
        let outs: Vec<_> = graph.outgoing(&token.node).cloned().collect();
        if inputs.len() == 1 && outs.len() == 1 {
            self.move_along(instance, token, &outs[0]);
            return;
        }
        for id in inputs {
            self.emit(Event::TokenConsumed {
                instance,
                token: id,
                node: token.node.clone(),
            });
        }
        for f in outs {
            let t = self.next_token();
            self.emit(Event::TokenCreated {
                instance,
                token: t,
                node: f.target.clone(),
                parent: token.parent,
                via: Some(f.id.clone()),
            });
        }
    }
}
