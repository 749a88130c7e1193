//! Nets (terminal sets), routing instances, the instance text format, and a
//! seeded synthetic instance generator.
//!
//! Instance file grammar (UTF-8, one directive per line, `#` comments):
//!
//! ```text
//! grid <rows> <cols>
//! width <W>
//! weight <r1> <c1> <r2> <c2> <w>     # optional, overrides the default of 1
//! net <id> (<r>,<c>) (<r>,<c>) [...]
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EdgeId, GridGraph, VertexId};

/// A net: at least two distinct in-bounds terminals that must be connected by
/// one route tree. Terminals are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: usize,
    terminals: Vec<VertexId>,
}

impl Net {
    pub fn new(id: usize, mut terminals: Vec<VertexId>, grid: &GridGraph) -> Result<Self> {
        terminals.sort();
        terminals.dedup();
        if terminals.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "net {id} needs at least 2 distinct terminals"
            )));
        }
        for &t in &terminals {
            if !grid.in_bounds(t) {
                return Err(Error::InvalidInstance(format!(
                    "net {id} terminal {t} out of bounds"
                )));
            }
        }
        Ok(Net { id, terminals })
    }

    pub fn terminals(&self) -> &[VertexId] {
        &self.terminals
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    nets: Vec<Net>,
}

impl Netlist {
    /// Nets must arrive with consecutive ids 1..=n.
    pub fn new(nets: Vec<Net>) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::InvalidInstance("netlist has no nets".into()));
        }
        for (i, net) in nets.iter().enumerate() {
            if net.id != i + 1 {
                return Err(Error::InvalidInstance(format!(
                    "net ids must be consecutive starting at 1; position {} has id {}",
                    i + 1,
                    net.id
                )));
            }
        }
        Ok(Netlist { nets })
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn len(&self) -> usize {
        self.nets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nets.is_empty()
    }
}

/// A full routing instance: graph, nets, and the channel width limit W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub grid: GridGraph,
    pub netlist: Netlist,
    pub w_init: usize,
}

impl Instance {
    pub fn new(grid: GridGraph, netlist: Netlist, w_init: usize) -> Result<Self> {
        if w_init < 1 {
            return Err(Error::InvalidInstance("width must be >= 1".into()));
        }
        Ok(Instance {
            grid,
            netlist,
            w_init,
        })
    }
}

/// Parses the instance text format described in the module docs.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut grid: Option<GridGraph> = None;
    let mut width: Option<usize> = None;
    let mut nets: Vec<Net> = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let directive = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        let err = |msg: String| Error::Parse { line, msg };

        match directive {
            "grid" => {
                if grid.is_some() {
                    return Err(err("duplicate grid directive".into()));
                }
                if rest.len() != 2 {
                    return Err(err("expected: grid <rows> <cols>".into()));
                }
                let rows = parse_num(rest[0], line)?;
                let cols = parse_num(rest[1], line)?;
                grid = Some(GridGraph::build(rows, cols, 1.0).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?);
            }
            "width" => {
                if rest.len() != 1 {
                    return Err(err("expected: width <W>".into()));
                }
                let w: usize = parse_num(rest[0], line)?;
                if w < 1 {
                    return Err(err("width must be >= 1".into()));
                }
                width = Some(w);
            }
            "weight" => {
                let g = grid
                    .as_mut()
                    .ok_or_else(|| err("weight directive before grid".into()))?;
                if rest.len() != 5 {
                    return Err(err("expected: weight <r1> <c1> <r2> <c2> <w>".into()));
                }
                let u = VertexId::new(parse_num(rest[0], line)?, parse_num(rest[1], line)?);
                let v = VertexId::new(parse_num(rest[2], line)?, parse_num(rest[3], line)?);
                let w: f64 = rest[4].parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad weight value '{}'", rest[4]),
                })?;
                let e = EdgeId::new(u, v).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                g.set_weight(e, w).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
            }
            "net" => {
                let g = grid
                    .as_ref()
                    .ok_or_else(|| err("net directive before grid".into()))?;
                if rest.len() < 3 {
                    return Err(err("expected: net <id> (<r>,<c>) (<r>,<c>) [...]".into()));
                }
                let id: usize = parse_num(rest[0], line)?;
                if !seen_ids.insert(id) {
                    return Err(err(format!("duplicate net id {id}")));
                }
                let terminals = rest[1..]
                    .iter()
                    .map(|t| parse_terminal(t, line))
                    .collect::<Result<Vec<_>>>()?;
                nets.push(Net::new(id, terminals, g).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?);
            }
            other => {
                return Err(err(format!("unknown directive '{other}'")));
            }
        }
    }

    let grid = grid.ok_or(Error::Parse {
        line: 0,
        msg: "missing grid directive".into(),
    })?;
    let width = width.ok_or(Error::Parse {
        line: 0,
        msg: "missing width directive".into(),
    })?;
    nets.sort_by_key(|n| n.id);
    let netlist = Netlist::new(nets).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    Instance::new(grid, netlist, width)
}

fn parse_num(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number '{tok}'"),
    })
}

fn parse_terminal(tok: &str, line: usize) -> Result<VertexId> {
    let inner = tok
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad terminal '{tok}', expected (<r>,<c>)"),
        })?;
    let mut parts = inner.split(',');
    let (r, c) = match (parts.next(), parts.next(), parts.next()) {
        (Some(r), Some(c), None) => (r.trim(), c.trim()),
        _ => {
            return Err(Error::Parse {
                line,
                msg: format!("bad terminal '{tok}', expected (<r>,<c>)"),
            })
        }
    };
    Ok(VertexId::new(parse_num(r, line)?, parse_num(c, line)?))
}

/// Serializes an instance back to the text format. `parse_instance` of the
/// output yields an equal instance.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    let g = &inst.grid;
    out.push_str(&format!("grid {} {}\n", g.rows(), g.cols()));
    out.push_str(&format!("width {}\n", inst.w_init));
    for idx in 0..g.num_edges() {
        let w = g.weight_by_index(idx);
        if w != 1.0 {
            let (a, b) = g.edge_at(idx).endpoints();
            out.push_str(&format!(
                "weight {} {} {} {} {}\n",
                a.row, a.col, b.row, b.col, w
            ));
        }
    }
    for net in inst.netlist.nets() {
        out.push_str(&format!("net {}", net.id));
        for t in net.terminals() {
            out.push_str(&format!(" ({},{})", t.row, t.col));
        }
        out.push('\n');
    }
    out
}

/// Deterministic synthetic instance generator. Terminal counts are drawn
/// uniformly from `terminals_per_net`, terminals sampled without replacement.
/// W defaults to the number of nets, which is always feasible.
pub fn generate_random(
    rows: usize,
    cols: usize,
    n_nets: usize,
    terminals_per_net: (usize, usize),
    seed: u64,
) -> Result<Instance> {
    let (tmin, tmax) = terminals_per_net;
    if tmin < 2 || tmax < tmin {
        return Err(Error::InvalidArgument(format!(
            "terminal range [{tmin},{tmax}] invalid (need 2 <= min <= max)"
        )));
    }
    if n_nets < 1 {
        return Err(Error::InvalidArgument("need at least one net".into()));
    }
    let grid = GridGraph::build(rows, cols, 1.0)?;
    if tmax > grid.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "cannot place {tmax} distinct terminals on {} vertices",
            grid.num_vertices()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<VertexId> = grid.vertices().collect();
    let mut nets = Vec::with_capacity(n_nets);
    for id in 1..=n_nets {
        let k = rng.gen_range(tmin..=tmax);
        let terminals: Vec<VertexId> = all.choose_multiple(&mut rng, k).copied().collect();
        nets.push(Net::new(id, terminals, &grid)?);
    }
    let netlist = Netlist::new(nets)?;
    Instance::new(grid, netlist, n_nets)
}
