//! Primal network simplex for uncapacitated transportation problems with
//! integer supplies and costs.
//!
//! The tree is stored with parent/thread/successor-count arrays and entering
//! arcs are chosen by block search. Leaving-arc ties are broken toward the
//! second half of the cycle, which keeps the basis strongly feasible and
//! prevents cycling on degenerate pivots.

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// An uncapacitated min-cost flow instance.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    supply: Vec<i64>,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<i64>,
}

/// Optimal flow and node potentials. For every arc,
/// `cost + potential[source] - potential[target] >= 0`, with equality on
/// arcs carrying flow.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub flow: Vec<i64>,
    pub potential: Vec<i64>,
    pub total_cost: i128,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowError {
    Unbalanced(i64),
    Infeasible,
    Unbounded,
}

impl FlowProblem {
    pub fn new(supply: Vec<i64>) -> Self {
        FlowProblem { supply, source: Vec::new(), target: Vec::new(), cost: Vec::new() }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cost: i64) -> usize {
        self.source.push(from);
        self.target.push(to);
        self.cost.push(cost);
        self.source.len() - 1
    }

    pub fn arc_count(&self) -> usize {
        self.source.len()
    }

    pub fn arc(&self, e: usize) -> (usize, usize, i64) {
        (self.source[e], self.target[e], self.cost[e])
    }

    pub fn solve(&self) -> Result<FlowSolution, FlowError> {
        let sum: i64 = self.supply.iter().sum();
        if sum != 0 {
            return Err(FlowError::Unbalanced(sum));
        }
        NetworkSimplex::new(self).run()
    }
}

struct NetworkSimplex {
    node_num: usize,
    arc_num: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<i64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    pi: Vec<i64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,
    root: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
    next_arc: usize,
    block_size: usize,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    fn new(p: &FlowProblem) -> Self {
        let node_num = p.supply.len();
        let arc_num = p.source.len();
        let all_arcs = arc_num + node_num;
        let total_nodes = node_num + 1;
        let max_cost = p.cost.iter().map(|c| c.abs()).max().unwrap_or(0);
        let art_cost = (max_cost + 1).saturating_mul(node_num as i64 + 1);

        let mut s = NetworkSimplex {
            node_num,
            arc_num,
            source: p.source.clone(),
            target: p.target.clone(),
            cost: p.cost.clone(),
            flow: vec![0; all_arcs],
            state: vec![STATE_LOWER; all_arcs],
            pi: vec![0; total_nodes],
            parent: vec![NONE; total_nodes],
            pred: vec![NONE; total_nodes],
            thread: vec![0; total_nodes],
            rev_thread: vec![0; total_nodes],
            succ_num: vec![0; total_nodes],
            last_succ: vec![0; total_nodes],
            pred_dir: vec![0; total_nodes],
            dirty_revs: Vec::new(),
            root: node_num,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
        };
        s.source.resize(all_arcs, 0);
        s.target.resize(all_arcs, 0);
        s.cost.resize(all_arcs, 0);

        let root = s.root;
        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root.wrapping_sub(1);
        s.pi[root] = 0;
        if node_num == 0 {
            s.thread[root] = root;
            s.rev_thread[root] = root;
            s.last_succ[root] = root;
        }
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if p.supply[u] >= 0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0;
                s.source[e] = u;
                s.target[e] = root;
                s.flow[e] = p.supply[u];
                s.cost[e] = 0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.source[e] = root;
                s.target[e] = u;
                s.flow[e] = -p.supply[u];
                s.cost[e] = art_cost;
            }
        }
        s
    }

    #[inline]
    fn reduced(&self, e: usize) -> i64 {
        self.state[e] as i64 * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]])
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = 0i64;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        while e < self.arc_num {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
            }
            cnt -= 1;
            if cnt == 0 {
                if min < 0 {
                    self.next_arc = e + 1;
                    return true;
                }
                cnt = self.block_size;
            }
            e += 1;
        }
        e = 0;
        while e < self.next_arc {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
            }
            cnt -= 1;
            if cnt == 0 {
                if min < 0 {
                    self.next_arc = e + 1;
                    return true;
                }
                cnt = self.block_size;
            }
            e += 1;
        }
        if min >= 0 {
            return false;
        }
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        // Entering arcs are always at their lower bound.
        let first = self.source[self.in_arc];
        let second = self.target[self.in_arc];
        let mut delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN { i64::MAX } else { self.flow[e] };
            if d < delta {
                delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP { i64::MAX } else { self.flow[e] };
            if d <= delta {
                delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0 && delta < i64::MAX
    }

    fn change_flow(&mut self) {
        if self.delta > 0 {
            let val = self.state[self.in_arc] as i64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            u = self.target[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] { DIR_UP } else { DIR_DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue =
                if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in] - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as i64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(mut self) -> Result<FlowSolution, FlowError> {
        let mut pivots = 0usize;
        if self.arc_num > 0 {
            while self.find_entering_arc() {
                self.find_join_node();
                if !self.find_leaving_arc() {
                    return Err(FlowError::Unbounded);
                }
                self.change_flow();
                self.update_tree_structure();
                self.update_potential();
                pivots += 1;
            }
        }
        if (self.arc_num..self.arc_num + self.node_num).any(|e| self.flow[e] != 0) {
            return Err(FlowError::Infeasible);
        }
        let flow = self.flow[..self.arc_num].to_vec();
        let total_cost = flow
            .iter()
            .zip(&self.cost[..self.arc_num])
            .map(|(&f, &c)| f as i128 * c as i128)
            .sum();
        let potential = self.pi[..self.node_num].to_vec();
        Ok(FlowSolution { flow, potential, total_cost, pivots })
    }
}
