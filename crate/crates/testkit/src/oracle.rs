//! Brute-force token simulation, written from the execution rules alone and
//! sharing no code with the engine beyond the definition types.

use std::collections::{BTreeMap, BTreeSet};

use agriflow_core::engine::{Actor, Engine, InstanceStatus};
use agriflow_core::model::{FlowNode, NodeKind, ProcessDefinition, SequenceFlow};
use agriflow_core::value::VariableMap;
use chrono::{TimeZone, Utc};

/// A state in which nothing moves without a task completion: the instance
/// status and the sorted node positions of all live tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Quiescent {
    pub status: &'static str,
    pub tokens: Vec<String>,
}

struct Net {
    kinds: BTreeMap<String, NodeKind>,
    outgoing: BTreeMap<String, Vec<SequenceFlow>>,
    incoming: BTreeMap<String, Vec<String>>,
    /// Start event of each sub-process.
    inner_start: BTreeMap<String, String>,
}

impl Net {
    fn new(def: &ProcessDefinition) -> Net {
        let mut net = Net {
            kinds: BTreeMap::new(),
            outgoing: BTreeMap::new(),
            incoming: BTreeMap::new(),
            inner_start: BTreeMap::new(),
        };
        net.add(&def.nodes, &def.flows);
        net
    }

    fn add(&mut self, nodes: &[FlowNode], flows: &[SequenceFlow]) {
        for n in nodes {
            self.kinds.insert(n.id.clone(), n.kind.clone());
            if let NodeKind::SubProcess { nodes: inner, flows: inner_flows } = &n.kind {
                if let Some(s) = inner.iter().find(|x| matches!(x.kind, NodeKind::StartEvent { .. })) {
                    self.inner_start.insert(n.id.clone(), s.id.clone());
                }
                self.add(inner, inner_flows);
            }
        }
        for f in flows {
            self.outgoing.entry(f.source.clone()).or_default().push(f.clone());
            self.incoming.entry(f.target.clone()).or_default().push(f.id.clone());
        }
    }

    fn out(&self, node: &str) -> &[SequenceFlow] {
        self.outgoing.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    fn in_count(&self, node: &str) -> usize {
        self.incoming.get(node).map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Arrived,
    /// At a user task, or a sub-process whose children run.
    Waiting,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Tok {
    id: u32,
    node: String,
    via: Option<String>,
    parent: Option<u32>,
    phase: Phase,
}

#[derive(Debug, Clone)]
struct Sim {
    tokens: Vec<Tok>,
    next: u32,
    failed: bool,
}

/// Evaluates `x <op> <int>`, the only condition shape the generator emits.
fn holds(cond: &str, x: i64) -> Option<bool> {
    let parts: Vec<&str> = cond.split_whitespace().collect();
    let [var, op, k] = parts.as_slice() else {
        return None;
    };
    if *var != "x" {
        return None;
    }
    let k: i64 = k.parse().ok()?;
    Some(match *op {
        "<" => x < k,
        ">" => x > k,
        "<=" => x <= k,
        ">=" => x >= k,
        "==" => x == k,
        "!=" => x != k,
        _ => return None,
    })
}

impl Sim {
    fn spawn(&mut self, node: &str, via: Option<String>, parent: Option<u32>) {
        self.next += 1;
        self.tokens.push(Tok {
            id: self.next,
            node: node.to_string(),
            via,
            parent,
            phase: Phase::Arrived,
        });
    }

    fn remove(&mut self, id: u32) -> Tok {
        let i = self.tokens.iter().position(|t| t.id == id).unwrap();
        self.tokens.remove(i)
    }

    fn pass(&mut self, t: Tok, f: &SequenceFlow) {
        self.remove(t.id);
        self.spawn(&f.target, Some(f.id.clone()), t.parent);
    }

    /// Moves any token that can move; false at quiescence.
    fn fire_one(&mut self, net: &Net, x: i64) -> bool {
        let mut order: Vec<Tok> = self.tokens.iter().filter(|t| t.phase == Phase::Arrived).cloned().collect();
        order.sort();
        for t in order {
            match &net.kinds[&t.node] {
                NodeKind::StartEvent { .. } => {
                    let f = net.out(&t.node)[0].clone();
                    self.pass(t, &f);
                    return true;
                }
                NodeKind::EndEvent => {
                    self.remove(t.id);
                    if let Some(p) = t.parent {
                        if !self.tokens.iter().any(|o| o.parent == Some(p)) {
                            let parent = self.remove(p);
                            let f = net.out(&parent.node)[0].clone();
                            self.spawn(&f.target, Some(f.id.clone()), parent.parent);
                        }
                    }
                    return true;
                }
                NodeKind::UserTask { .. } | NodeKind::ServiceTask { .. } => {
                    self.tokens.iter_mut().find(|o| o.id == t.id).unwrap().phase = Phase::Waiting;
                    return true;
                }
                NodeKind::SubProcess { .. } => {
                    self.tokens.iter_mut().find(|o| o.id == t.id).unwrap().phase = Phase::Waiting;
                    let start = net.inner_start[&t.node].clone();
                    self.spawn(&start, None, Some(t.id));
                    return true;
                }
                NodeKind::ExclusiveGateway { default_flow } => {
                    let mut pick = None;
                    for f in net.out(&t.node) {
                        if Some(&f.id) == default_flow.as_ref() {
                            continue;
                        }
                        match &f.condition {
                            None => {
                                pick = Some(f.clone());
                                break;
                            }
                            Some(c) => match holds(c.source(), x) {
                                Some(true) => {
                                    pick = Some(f.clone());
                                    break;
                                }
                                Some(false) => {}
                                None => {
                                    self.fail();
                                    return true;
                                }
                            },
                        }
                    }
                    let pick = pick.or_else(|| {
                        default_flow
                            .as_ref()
                            .and_then(|d| net.out(&t.node).iter().find(|f| f.id == *d).cloned())
                    });
                    match pick {
                        Some(f) => self.pass(t, &f),
                        None => self.fail(),
                    }
                    return true;
                }
                NodeKind::ParallelGateway => {
                    let outs = net.out(&t.node).to_vec();
                    if net.in_count(&t.node) <= 1 {
                        self.remove(t.id);
                        for f in outs {
                            self.spawn(&f.target, Some(f.id.clone()), t.parent);
                        }
                        return true;
                    }
                    let mut take = Vec::new();
                    for inc in &net.incoming[&t.node] {
                        let hit = self.tokens.iter().find(|o| {
                            o.node == t.node
                                && o.parent == t.parent
                                && o.phase == Phase::Arrived
                                && o.via.as_deref() == Some(inc)
                        });
                        match hit {
                            Some(o) => take.push(o.id),
                            None => break,
                        }
                    }
                    if take.len() < net.in_count(&t.node) {
                        continue;
                    }
                    for id in take {
                        self.remove(id);
                    }
                    for f in outs {
                        self.spawn(&f.target, Some(f.id.clone()), t.parent);
                    }
                    return true;
                }
            }
        }
        false
    }

    fn fail(&mut self) {
        self.failed = true;
        self.tokens.clear();
    }

    fn settle(&mut self, net: &Net, x: i64) {
        while !self.failed && self.fire_one(net, x) {}
    }

    fn snapshot(&self) -> Quiescent {
        let mut tokens: Vec<String> = self.tokens.iter().map(|t| t.node.clone()).collect();
        tokens.sort();
        let status = if self.failed {
            "failed"
        } else if self.tokens.is_empty() {
            "completed"
        } else {
            "running"
        };
        Quiescent { status, tokens }
    }

    fn waiting_tasks(&self, net: &Net) -> Vec<u32> {
        self.tokens
            .iter()
            .filter(|t| t.phase == Phase::Waiting && matches!(net.kinds[&t.node], NodeKind::UserTask { .. }))
            .map(|t| t.id)
            .collect()
    }

    fn complete(&mut self, net: &Net, id: u32) {
        let t = self.tokens.iter().find(|t| t.id == id).unwrap().clone();
        let f = net.out(&t.node)[0].clone();
        self.pass(t, &f);
    }
}

/// Every quiescent state reachable by completing tasks in any order.
pub fn oracle_reachable(def: &ProcessDefinition, x: i64) -> BTreeSet<Quiescent> {
    let net = Net::new(def);
    let mut init = Sim {
        tokens: Vec::new(),
        next: 0,
        failed: false,
    };
    for s in &def.start_nodes {
        init.spawn(s, None, None);
    }
    init.settle(&net, x);
    let mut seen = BTreeSet::new();
    let mut stack = vec![init];
    while let Some(sim) = stack.pop() {
        if !seen.insert(sim.snapshot()) {
            continue;
        }
        for id in sim.waiting_tasks(&net) {
            let mut next = sim.clone();
            next.complete(&net, id);
            next.settle(&net, x);
            stack.push(next);
        }
    }
    seen
}

fn engine_after(def: &ProcessDefinition, x: i64, path: &[String]) -> Result<(Quiescent, Vec<String>), String> {
    let now = Utc.with_ymd_and_hms(2025, 5, 1, 6, 0, 0).unwrap();
    let mut engine = Engine::in_memory();
    let actor = Actor::system();
    engine.deploy(def.clone(), &[], "oracle", now).map_err(|e| e.to_string())?;
    let id = engine
        .start_instance(&def.id, VariableMap::new().with("x", x), &actor, now)
        .map_err(|e| e.to_string())?;
    for node in path {
        let task = engine
            .state()
            .pending_tasks()
            .find(|t| t.instance == id && t.node == *node)
            .map(|t| t.id)
            .ok_or_else(|| format!("no pending task at '{node}'"))?;
        engine
            .complete_task(task, VariableMap::new(), &actor, now)
            .map_err(|e| e.to_string())?;
    }
    let inst = &engine.state().instances[&id];
    let status = match inst.status {
        InstanceStatus::Running => "running",
        InstanceStatus::Completed => "completed",
        InstanceStatus::Failed => "failed",
        InstanceStatus::Terminated => "terminated",
    };
    let mut tokens: Vec<String> = inst.tokens.values().map(|t| t.node.clone()).collect();
    tokens.sort();
    let mut tasks: Vec<String> = engine
        .state()
        .pending_tasks()
        .filter(|t| t.instance == id)
        .map(|t| t.node.clone())
        .collect();
    tasks.sort();
    Ok((Quiescent { status, tokens }, tasks))
}

/// Every quiescent state the engine reaches under all completion orders.
/// Each order is replayed on a fresh engine.
pub fn engine_reachable(def: &ProcessDefinition, x: i64) -> Result<BTreeSet<Quiescent>, String> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<Vec<String>> = vec![Vec::new()];
    while let Some(path) = stack.pop() {
        let (state, tasks) = engine_after(def, x, &path)?;
        if !seen.insert(state) {
            continue;
        }
        for t in tasks {
            let mut p = path.clone();
            p.push(t);
            stack.push(p);
        }
    }
    Ok(seen)
}
