//! Structural equality of definitions up to renaming of node and flow ids.

use std::collections::BTreeMap;

use agriflow_core::model::{FlowNode, NodeKind, ProcessDefinition, SequenceFlow};

struct Flat {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
    /// (source, target, label) over node indices.
    edges: Vec<(usize, usize, String)>,
}

fn node_label(n: &FlowNode) -> String {
    let kind = match &n.kind {
        NodeKind::SubProcess { .. } => "subProcess".to_string(),
        NodeKind::ExclusiveGateway { .. } => "exclusiveGateway".to_string(),
        k => format!("{k:?}"),
    };
    format!("{kind}|{}", n.name)
}

fn flatten(def: &ProcessDefinition) -> Flat {
    let mut f = Flat {
        labels: Vec::new(),
        parent: Vec::new(),
        edges: Vec::new(),
    };
    let mut index = BTreeMap::new();
    let mut flows: Vec<(SequenceFlow, Option<String>)> = Vec::new();
    fn walk(
        nodes: &[FlowNode],
        flows: &[SequenceFlow],
        parent: Option<usize>,
        f: &mut Flat,
        index: &mut BTreeMap<String, usize>,
        all: &mut Vec<(SequenceFlow, Option<String>)>,
    ) {
        let mut defaults = BTreeMap::new();
        for n in nodes {
            index.insert(n.id.clone(), f.labels.len());
            f.labels.push(node_label(n));
            f.parent.push(parent);
            if let NodeKind::ExclusiveGateway { default_flow: Some(d) } = &n.kind {
                defaults.insert(d.clone(), n.id.clone());
            }
            if let NodeKind::SubProcess { nodes, flows } = &n.kind {
                let me = f.labels.len() - 1;
                walk(nodes, flows, Some(me), f, index, all);
            }
        }
        for fl in flows {
            all.push((fl.clone(), defaults.get(&fl.id).cloned()));
        }
    }
    walk(&def.nodes, &def.flows, None, &mut f, &mut index, &mut flows);
    for (fl, default_of) in flows {
        let label = format!(
            "{}|{}|{}",
            fl.condition.as_ref().map_or("", |c| c.source()),
            default_of.is_some(),
            fl.name.unwrap_or_default()
        );
        f.edges.push((index[&fl.source], index[&fl.target], label));
    }
    f
}

/// Colour refinement over the disjoint union so both sides share a palette.
fn refine(a: &Flat, b: &Flat) -> (Vec<usize>, Vec<usize>) {
    let graphs = [a, b];
    let mut colors: Vec<Vec<usize>> = Vec::new();
    let mut palette: BTreeMap<String, usize> = BTreeMap::new();
    for g in graphs {
        colors.push(
            g.labels
                .iter()
                .map(|l| {
                    let n = palette.len();
                    *palette.entry(l.clone()).or_insert(n)
                })
                .collect(),
        );
    }
    loop {
        let mut palette: BTreeMap<String, usize> = BTreeMap::new();
        let mut next: Vec<Vec<usize>> = Vec::new();
        for (gi, g) in graphs.iter().enumerate() {
            let c = &colors[gi];
            let mut sig = Vec::new();
            for v in 0..g.labels.len() {
                let mut outs: Vec<(String, usize)> =
                    g.edges.iter().filter(|e| e.0 == v).map(|e| (e.2.clone(), c[e.1])).collect();
                let mut ins: Vec<(String, usize)> =
                    g.edges.iter().filter(|e| e.1 == v).map(|e| (e.2.clone(), c[e.0])).collect();
                let mut kids: Vec<usize> = (0..g.labels.len()).filter(|&k| g.parent[k] == Some(v)).map(|k| c[k]).collect();
                outs.sort();
                ins.sort();
                kids.sort();
                let up = g.parent[v].map(|p| c[p]);
                sig.push(format!("{}|{outs:?}|{ins:?}|{kids:?}|{up:?}", c[v]));
            }
            next.push(
                sig.into_iter()
                    .map(|s| {
                        let n = palette.len();
                        *palette.entry(s).or_insert(n)
                    })
                    .collect(),
            );
        }
        let classes = |cs: &Vec<Vec<usize>>| cs.iter().flatten().collect::<std::collections::BTreeSet<_>>().len();
        let stable = classes(&next) == classes(&colors);
        colors = next;
        if stable {
            break;
        }
    }
    let cb = colors.pop().unwrap();
    let ca = colors.pop().unwrap();
    (ca, cb)
}

fn edge_count(g: &Flat, s: usize, t: usize) -> Vec<&str> {
    let mut v: Vec<&str> = g.edges.iter().filter(|e| e.0 == s && e.1 == t).map(|e| e.2.as_str()).collect();
    v.sort();
    v
}

fn extend(a: &Flat, b: &Flat, ca: &[usize], cb: &[usize], map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
    let i = map.len();
    if i == a.labels.len() {
        return true;
    }
    for j in 0..b.labels.len() {
        if used[j] || ca[i] != cb[j] {
            continue;
        }
        let parent_ok = match (a.parent[i], b.parent[j]) {
            (None, None) => true,
            (Some(p), Some(q)) => p >= i || map[p] == q,
            _ => false,
        };
        if !parent_ok {
            continue;
        }
        let consistent = (0..=i).all(|u| {
            let ju = if u == i { j } else { map[u] };
            edge_count(a, i, u) == edge_count(b, j, ju) && edge_count(a, u, i) == edge_count(b, ju, j)
        });
        if !consistent {
            continue;
        }
        map.push(j);
        used[j] = true;
        if extend(a, b, ca, cb, map, used) {
            return true;
        }
        map.pop();
        used[j] = false;
    }
    false
}

/// True when the two definitions have the same id, name and structure, with
/// node and flow ids free to differ.
pub fn isomorphic(a: &ProcessDefinition, b: &ProcessDefinition) -> bool {
    if a.id != b.id || a.name != b.name {
        return false;
    }
    let (fa, fb) = (flatten(a), flatten(b));
    if fa.labels.len() != fb.labels.len() || fa.edges.len() != fb.edges.len() {
        return false;
    }
    let (ca, cb) = refine(&fa, &fb);
    let mut sa = ca.clone();
    let mut sb = cb.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return false;
    }
    let mut map = Vec::new();
    let mut used = vec![false; fb.labels.len()];
    extend(&fa, &fb, &ca, &cb, &mut map, &mut used)
}
