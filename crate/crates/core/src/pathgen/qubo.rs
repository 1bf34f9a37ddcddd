use crate::netmodel::RoadNetwork;

use super::Path;

/// Meaning of one binary QUBO variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuboVar {
    /// `y_ijk` for a link.
    Link(usize),
    /// Slack `a_ik` of the one-outgoing-link row at a node.
    Slack(usize),
}

/// `‖A X − b‖²` written as `XᵀQX + offset` over binary `X`.
///
/// The linear system is kept alongside `Q` so residuals can be checked in
/// exact integer arithmetic.
#[derive(Debug, Clone)]
pub struct QuboProblem {
    target: usize,
    vars: Vec<QuboVar>,
    q: Vec<f64>,
    offset: f64,
    rows: Vec<Vec<(usize, i64)>>,
    rhs: Vec<i64>,
}

/// Path-finding QUBO for `target`: the flow balance rows (one unit leaves
/// `target`, every other non-exit node balanced) and, with
/// `forbid_cycles`, one `Σ out + a_i = 1` row per non-exit node.
///
/// Links leaving an exit are not variables: no route needs them and the
/// balance rows would leave them unconstrained.
pub fn build_path_qubo(net: &RoadNetwork, target: usize, forbid_cycles: bool) -> QuboProblem {
    assert!(!net.is_exit(target), "path QUBO target must not be an exit");
    let mut vars = Vec::new();
    let mut var_of_link = vec![None; net.link_count()];
    for (l, link) in net.links().iter().enumerate() {
        if !net.is_exit(link.from) {
            var_of_link[l] = Some(vars.len());
            vars.push(QuboVar::Link(l));
        }
    }
    let interior: Vec<usize> = (0..net.node_count()).filter(|&i| !net.is_exit(i)).collect();

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for &i in &interior {
        let mut row = Vec::new();
        row.extend(net.out_links(i).iter().filter_map(|&l| var_of_link[l]).map(|v| (v, 1)));
        row.extend(net.in_links(i).iter().filter_map(|&l| var_of_link[l]).map(|v| (v, -1)));
        rows.push(row);
        rhs.push((i == target) as i64);
    }
    if forbid_cycles {
        for &i in &interior {
            let slack = vars.len();
            vars.push(QuboVar::Slack(i));
            let mut row: Vec<(usize, i64)> =
                net.out_links(i).iter().filter_map(|&l| var_of_link[l]).map(|v| (v, 1)).collect();
            row.push((slack, 1));
            rows.push(row);
            rhs.push(1);
        }
    }

    let n = vars.len();
    let mut q = vec![0.0; n * n];
    let mut offset = 0.0;
    for (row, &b) in rows.iter().zip(&rhs) {
        for &(i, ai) in row {
            for &(j, aj) in row {
                q[i * n + j] += (ai * aj) as f64;
            }
            q[i * n + i] -= (2 * ai * b) as f64;
        }
        offset += (b * b) as f64;
    }
    QuboProblem { target, vars, q, offset, rows, rhs }
}

impl QuboProblem {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[QuboVar] {
        &self.vars
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.vars.len() + j]
    }

    /// Rows of the encoded system as sparse `(variable, coefficient)` lists.
    pub fn rows(&self) -> &[Vec<(usize, i64)>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[i64] {
        &self.rhs
    }

    pub fn energy(&self, x: &[u8]) -> f64 {
        let n = self.vars.len();
        let mut e = self.offset;
        for i in (0..n).filter(|&i| x[i] == 1) {
            let row = &self.q[i * n..(i + 1) * n];
            e += (0..n).filter(|&j| x[j] == 1).map(|j| row[j]).sum::<f64>();
        }
        e
    }

    /// `‖A X − b‖²` in integer arithmetic.
    pub fn residual(&self, x: &[u8]) -> i64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| {
                let r: i64 = row.iter().map(|&(v, a)| a * x[v] as i64).sum::<i64>() - b;
                r * r
            })
            .sum()
    }

    /// Link selection encoded by `x`.
    pub fn decode(&self, x: &[u8], link_count: usize) -> Vec<bool> {
        let mut selected = vec![false; link_count];
        for (var, &bit) in self.vars.iter().zip(x) {
            if let (QuboVar::Link(l), 1) = (var, bit) {
                selected[*l] = true;
            }
        }
        selected
    }

    /// Binary assignment for a route; slacks take up the unused
    /// one-outgoing-link capacity at each node.
    pub fn encode_path(&self, net: &RoadNetwork, path: &Path) -> Vec<u8> {
        let mut on_path = vec![false; net.link_count()];
        for &l in &path.links {
            on_path[l] = true;
        }
        self.vars
            .iter()
            .map(|var| match *var {
                QuboVar::Link(l) => on_path[l] as u8,
                QuboVar::Slack(i) => {
                    let out = net.out_links(i).iter().filter(|&&l| on_path[l]).count();
                    (out == 0) as u8
                }
            })
            .collect()
    }

    /// Off-diagonal neighbours of each variable, for local-field updates.
    pub(crate) fn neighbours(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.vars.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.q[i * n + j] != 0.0)
                    .map(|j| (j, self.q[i * n + j]))
                    .collect()
            })
            .collect()
    }
}
