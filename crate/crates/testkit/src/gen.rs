//! Random valid process definitions built from nested blocks.

use agriflow_core::expr::ConditionExpression;
use agriflow_core::model::{
    FlowNode, FormField, InputMapping, InputSource, NodeKind, OutputMapping, ProcessDefinition, SequenceFlow,
    TimerSpec,
};
use agriflow_core::role::Role;
use agriflow_core::value::{Value, ValueType};
use rand::seq::IndexedRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GenOptions {
    /// Upper bound on flow nodes, sub-process contents included.
    pub max_nodes: usize,
    pub service_tasks: bool,
    pub timers: bool,
    pub form_fields: bool,
}

impl GenOptions {
    /// Small definitions over user tasks, gateways and sub-processes only.
    pub fn engine() -> GenOptions {
        GenOptions {
            max_nodes: 8,
            service_tasks: false,
            timers: false,
            form_fields: false,
        }
    }

    /// Larger definitions exercising every supported element.
    pub fn full() -> GenOptions {
        GenOptions {
            max_nodes: 24,
            service_tasks: true,
            timers: true,
            form_fields: true,
        }
    }
}

#[derive(Debug, Clone)]
enum Block {
    Task,
    Seq(Box<Block>, Box<Block>),
    /// Branches (`None` is an empty branch) and whether they rejoin.
    Par(Vec<Option<Block>>, bool),
    /// Branches, whether the last branch is the default, whether they rejoin.
    Xor(Vec<Option<Block>>, bool, bool),
    Sub(Box<Block>),
}

impl Block {
    fn size(&self) -> usize {
        let branches = |bs: &Vec<Option<Block>>| bs.iter().flatten().map(Block::size).sum::<usize>();
        match self {
            Block::Task => 1,
            Block::Seq(a, b) => a.size() + b.size(),
            Block::Par(bs, join) | Block::Xor(bs, _, join) => {
                1 + branches(bs) + if *join { 1 } else { bs.len() }
            }
            Block::Sub(b) => 3 + b.size(),
        }
    }
}

fn gen_block<R: Rng>(rng: &mut R, budget: usize, tail: bool, depth: u32) -> Block {
    if budget < 3 || depth > 3 {
        return Block::Task;
    }
    let choice = rng.random_range(0..10);
    match choice {
        0..=2 => Block::Task,
        3 | 4 => {
            let a = gen_block(rng, budget / 2, false, depth + 1);
            let rest = budget.saturating_sub(a.size()).max(1);
            let b = gen_block(rng, rest, tail, depth + 1);
            Block::Seq(Box::new(a), Box::new(b))
        }
        5 if budget >= 4 => {
            let inner = gen_block(rng, budget - 3, true, depth + 1);
            Block::Sub(Box::new(inner))
        }
        _ => {
            let parallel = choice % 2 == 0;
            let join = !tail || rng.random_bool(0.6);
            let n = if budget >= 6 && rng.random_bool(0.3) { 3 } else { 2 };
            let fixed = if join { 2 } else { 1 + n };
            if budget < fixed + 1 {
                return Block::Task;
            }
            let mut left = budget - fixed;
            let mut branches = Vec::new();
            for i in 0..n {
                // An empty branch needs a join to land on.
                if join && i > 0 && rng.random_bool(0.25) {
                    branches.push(None);
                    continue;
                }
                let share = (left / (n - i)).max(1);
                let b = gen_block(rng, share, !join, depth + 1);
                left = left.saturating_sub(b.size());
                branches.push(Some(b));
            }
            if !join && branches.iter().any(Option::is_none) {
                return Block::Task;
            }
            let b = if parallel {
                Block::Par(branches, join)
            } else {
                Block::Xor(branches, rng.random_bool(0.7), join)
            };
            if b.size() > budget {
                Block::Task
            } else {
                b
            }
        }
    }
}

struct Emitter<'a, R: Rng> {
    rng: &'a mut R,
    opts: &'a GenOptions,
    next_node: usize,
    next_flow: usize,
}

type Scope = (Vec<FlowNode>, Vec<SequenceFlow>);

impl<R: Rng> Emitter<'_, R> {
    fn node(&mut self, scope: &mut Scope, kind: NodeKind) -> String {
        self.next_node += 1;
        let id = format!("n{}", self.next_node);
        let name = if self.rng.random_bool(0.5) {
            format!("{} {}", kind.label(), self.next_node)
        } else {
            String::new()
        };
        scope.0.push(FlowNode { id: id.clone(), name, kind });
        id
    }

    fn flow(&mut self, scope: &mut Scope, source: &str, target: &str, condition: Option<ConditionExpression>) -> String {
        self.next_flow += 1;
        let id = format!("f{}", self.next_flow);
        scope.1.push(SequenceFlow {
            id: id.clone(),
            name: None,
            source: source.to_string(),
            target: target.to_string(),
            condition,
        });
        id
    }

    fn condition(&mut self) -> ConditionExpression {
        let op = ["<", ">", "==", "<=", ">=", "!="].choose(self.rng).unwrap();
        let k = self.rng.random_range(0..4);
        ConditionExpression::parse(&format!("x {op} {k}")).expect("generated condition")
    }

    fn task(&mut self) -> NodeKind {
        if self.opts.service_tasks && self.rng.random_bool(0.3) {
            let mut inputs = vec![InputMapping {
                param: "location".into(),
                source: InputSource::Literal(Value::Text("vineyard".into())),
            }];
            inputs.push(InputMapping {
                param: "date".into(),
                source: InputSource::Variable("trigger_date".into()),
            });
            let outputs = if self.rng.random_bool(0.5) {
                vec![OutputMapping {
                    output: "t_max".into(),
                    variable: "temp".into(),
                }]
            } else {
                Vec::new()
            };
            return NodeKind::ServiceTask {
                connector: "weather.forecast".into(),
                inputs,
                outputs,
            };
        }
        let candidate_role = *Role::ALL.choose(self.rng).unwrap();
        let mut form_fields = Vec::new();
        if self.opts.form_fields {
            for i in 0..self.rng.random_range(0..3) {
                let ty = *[ValueType::Text, ValueType::Integer, ValueType::Boolean, ValueType::Decimal]
                    .choose(self.rng)
                    .unwrap();
                form_fields.push(FormField {
                    name: format!("field_{}_{i}", self.next_node + 1),
                    ty,
                    required: self.rng.random_bool(0.5),
                    label: self.rng.random_bool(0.5).then(|| format!("Field {i}")),
                });
            }
        }
        NodeKind::UserTask {
            candidate_role,
            form_fields,
        }
    }

    /// Emits `block` entered from `from` (with `cond` on the entering flow).
    /// Returns the flow-source node to continue from, or `None` if every
    /// path through the block ended in its own end event.
    fn emit(&mut self, scope: &mut Scope, block: &Block, from: &str, cond: Option<ConditionExpression>) -> (Option<String>, String) {
        match block {
            Block::Task => {
                let kind = self.task();
                let n = self.node(scope, kind);
                let f = self.flow(scope, from, &n, cond);
                (Some(n), f)
            }
            Block::Seq(a, b) => {
                let (mid, f) = self.emit(scope, a, from, cond);
                let mid = mid.expect("only tails terminate");
                let (out, _) = self.emit(scope, b, &mid, None);
                (out, f)
            }
            Block::Sub(inner) => {
                let mut sub: Scope = (Vec::new(), Vec::new());
                let start = self.node(&mut sub, NodeKind::StartEvent { timer: None });
                let (out, _) = self.emit(&mut sub, inner, &start, None);
                if let Some(out) = out {
                    let end = self.node(&mut sub, NodeKind::EndEvent);
                    self.flow(&mut sub, &out, &end, None);
                }
                let n = self.node(
                    scope,
                    NodeKind::SubProcess {
                        nodes: sub.0,
                        flows: sub.1,
                    },
                );
                let f = self.flow(scope, from, &n, cond);
                (Some(n), f)
            }
            Block::Par(branches, join) | Block::Xor(branches, _, join) => {
                let exclusive = matches!(block, Block::Xor(..));
                let with_default = matches!(block, Block::Xor(_, true, _));
                let split_kind = if exclusive {
                    NodeKind::ExclusiveGateway { default_flow: None }
                } else {
                    NodeKind::ParallelGateway
                };
                let split = self.node(scope, split_kind);
                let f_in = self.flow(scope, from, &split, cond);
                let merge = join.then(|| {
                    let kind = if exclusive {
                        NodeKind::ExclusiveGateway { default_flow: None }
                    } else {
                        NodeKind::ParallelGateway
                    };
                    self.node(scope, kind)
                });
                let mut default = None;
                for (i, b) in branches.iter().enumerate() {
                    let is_default = with_default && i + 1 == branches.len();
                    let c = (exclusive && !is_default).then(|| self.condition());
                    let (out, first) = match b {
                        Some(b) => self.emit(scope, b, &split, c),
                        None => {
                            let m = merge.clone().expect("empty branches only with a join");
                            let f = self.flow(scope, &split, &m, c);
                            (None, f)
                        }
                    };
                    if is_default {
                        default = Some(first);
                    }
                    match (&merge, out, b.is_some()) {
                        (Some(m), Some(o), _) => {
                            self.flow(scope, &o, m, None);
                        }
                        (None, Some(o), _) => {
                            let end = self.node(scope, NodeKind::EndEvent);
                            self.flow(scope, &o, &end, None);
                        }
                        _ => {}
                    }
                }
                if let Some(d) = default {
                    let node = scope.0.iter_mut().find(|n| n.id == split).unwrap();
                    node.kind = NodeKind::ExclusiveGateway { default_flow: Some(d) };
                }
                (merge, f_in)
            }
        }
    }
}

/// A random definition that passes validation. Exclusive gateways branch on
/// an integer variable `x`; instances should be started with it bound.
pub fn random_definition<R: Rng>(rng: &mut R, id: &str, opts: &GenOptions) -> ProcessDefinition {
    loop {
        let body = gen_block(rng, opts.max_nodes.saturating_sub(2), true, 0);
        if body.size() + 2 > opts.max_nodes {
            continue;
        }
        let mut e = Emitter {
            rng,
            opts,
            next_node: 0,
            next_flow: 0,
        };
        let mut top: Scope = (Vec::new(), Vec::new());
        let timer = (opts.timers && e.rng.random_bool(0.3)).then(|| {
            let text = ["R/P1D", "R/P1Y", "R3/PT12H", "R/P1W"].choose(e.rng).unwrap();
            TimerSpec::cycle(text).unwrap()
        });
        let start = e.node(&mut top, NodeKind::StartEvent { timer });
        let (out, _) = e.emit(&mut top, &body, &start, None);
        if let Some(out) = out {
            let end = e.node(&mut top, NodeKind::EndEvent);
            e.flow(&mut top, &out, &end, None);
        }
        let def = ProcessDefinition {
            id: id.to_string(),
            name: format!("Generated {id}"),
            version: 0,
            nodes: top.0,
            flows: top.1,
            start_nodes: vec![start],
        };
        if count_nodes(&def.nodes) <= opts.max_nodes {
            return def;
        }
    }
}

pub fn count_nodes(nodes: &[FlowNode]) -> usize {
    nodes
        .iter()
        .map(|n| match &n.kind {
            NodeKind::SubProcess { nodes, .. } => 1 + count_nodes(nodes),
            _ => 1,
        })
        .sum()
}
