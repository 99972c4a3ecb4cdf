//! Primal network simplex for uncapacitated min-cost flow.
//!
//! The spanning tree is rooted at an extra node joined to every real node by
//! an artificial arc. Pivots use block-search pricing and the strongly
//! feasible leaving-arc rule, which rules out cycling. The tree is stored as
//! parent pointers plus child lists, so a pivot costs the length of the
//! cycle plus the size of the re-hung subtree.

const BLOCK_FACTOR: f64 = 1.0;
const MIN_BLOCK: usize = 10;

pub(crate) struct NetworkSimplex {
    nodes: usize,
    root: usize,
    source: Vec<u32>,
    target: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    /// 0 for tree arcs, 1 for arcs at their lower bound.
    state: Vec<i8>,
    supply: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_up: Vec<bool>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    child_pos: Vec<usize>,
    pi: Vec<f64>,
    next_arc: usize,
    block: usize,
    tol: f64,
    stack: Vec<usize>,
    pub pivots: usize,
}

impl NetworkSimplex {
    /// `supply[u] > 0` for sources, `< 0` for sinks; the sum must be zero.
    /// `art_cost` must exceed the cost of any simple path in the full graph.
    pub fn new(supply: Vec<f64>, art_cost: f64, tol: f64) -> Self {
        let nodes = supply.len();
        let root = nodes;
        let mut s = NetworkSimplex {
            nodes,
            root,
            source: Vec::with_capacity(nodes),
            target: Vec::with_capacity(nodes),
            cost: Vec::with_capacity(nodes),
            flow: Vec::with_capacity(nodes),
            state: Vec::with_capacity(nodes),
            supply,
            parent: vec![usize::MAX; nodes + 1],
            pred: vec![usize::MAX; nodes + 1],
            pred_up: vec![false; nodes + 1],
            depth: vec![0; nodes + 1],
            children: vec![Vec::new(); nodes + 1],
            child_pos: vec![0; nodes + 1],
            pi: vec![0.0; nodes + 1],
            next_arc: 0,
            block: MIN_BLOCK,
            tol,
            stack: Vec::new(),
            pivots: 0,
        };
        s.children[root] = (0..nodes).collect();
        for u in 0..nodes {
            let e = u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.depth[u] = 1;
            s.child_pos[u] = u;
            if s.supply[u] >= 0.0 {
                s.source.push(u as u32);
                s.target.push(root as u32);
                s.cost.push(0.0);
                s.flow.push(s.supply[u]);
                s.pred_up[u] = true;
                s.pi[u] = 0.0;
            } else {
                s.source.push(root as u32);
                s.target.push(u as u32);
                s.cost.push(art_cost);
                s.flow.push(-s.supply[u]);
                s.pred_up[u] = false;
                s.pi[u] = art_cost;
            }
            s.state.push(0);
        }
        s
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cost: f64) {
        self.source.push(from as u32);
        self.target.push(to as u32);
        self.cost.push(cost);
        self.flow.push(0.0);
        self.state.push(1);
    }

    /// Real (non-artificial) arcs, in insertion order.
    pub fn arc(&self, e: usize) -> (usize, usize, f64) {
        let k = e + self.nodes;
        (self.source[k] as usize, self.target[k] as usize, self.flow[k])
    }

    pub fn num_real_arcs(&self) -> usize {
        self.cost.len() - self.nodes
    }

    /// Node potentials; reduced cost of `u → v` is `c + π_u − π_v`.
    pub fn potentials(&self) -> &[f64] {
        &self.pi[..self.nodes]
    }

    /// Largest flow remaining on artificial arcs.
    pub fn artificial_flow(&self) -> f64 {
        self.flow[..self.nodes].iter().fold(0.0, |m, f| m.max(*f))
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e] as usize] - self.pi[self.target[e] as usize]
    }

    fn find_entering(&mut self) -> Option<usize> {
        let m = self.cost.len();
        let mut best = -self.tol;
        let mut best_arc = None;
        let mut cnt = self.block;
        let start = self.next_arc.min(m);
        for e in (start..m).chain(0..start) {
            if self.state[e] != 0 {
                let c = self.reduced(e);
                if c < best {
                    best = c;
                    best_arc = Some(e);
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if best_arc.is_some() {
                    self.next_arc = e + 1;
                    return best_arc;
                }
                cnt = self.block;
            }
        }
        if best_arc.is_some() {
            self.next_arc = start;
        }
        best_arc
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn detach(&mut self, w: usize) {
        let p = self.parent[w];
        let pos = self.child_pos[w];
        self.children[p].swap_remove(pos);
        if pos < self.children[p].len() {
            let moved = self.children[p][pos];
            self.child_pos[moved] = pos;
        }
    }

    fn attach(&mut self, w: usize, p: usize, e: usize, up: bool) {
        self.parent[w] = p;
        self.pred[w] = e;
        self.pred_up[w] = up;
        self.child_pos[w] = self.children[p].len();
        self.children[p].push(w);
    }

    fn pivot(&mut self, e_in: usize) {
        let first = self.source[e_in] as usize;
        let second = self.target[e_in] as usize;
        let join = self.find_join(first, second);

        let mut delta = f64::INFINITY;
        let mut u_out = usize::MAX;
        let mut result = 0;
        let mut u = first;
        while u != join {
            if self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if !self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        // Nonnegative costs leave no negative cycle, so some arc must block.
        debug_assert!(result != 0);

        if delta > 0.0 {
            self.flow[e_in] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                if self.pred_up[u] {
                    self.flow[e] -= delta;
                } else {
                    self.flow[e] += delta;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                if self.pred_up[u] {
                    self.flow[e] += delta;
                } else {
                    self.flow[e] -= delta;
                }
                u = self.parent[u];
            }
        }
        let e_out = self.pred[u_out];
        self.flow[e_out] = 0.0;
        self.state[e_out] = 1;
        self.state[e_in] = 0;

        let (u_in, v_in) = if result == 1 { (first, second) } else { (second, first) };
        self.rehang(u_in, v_in, u_out, e_in);
    }

    fn rehang(&mut self, u_in: usize, v_in: usize, u_out: usize, e_in: usize) {
        let mut path = vec![u_in];
        while *path.last().unwrap() != u_out {
            let w = self.parent[*path.last().unwrap()];
            path.push(w);
        }
        let old: Vec<(usize, bool)> = path.iter().map(|&w| (self.pred[w], self.pred_up[w])).collect();
        for &w in &path {
            self.detach(w);
        }
        let up = self.source[e_in] as usize == u_in;
        self.attach(u_in, v_in, e_in, up);
        for k in 1..path.len() {
            self.attach(path[k], path[k - 1], old[k - 1].0, !old[k - 1].1);
        }

        let c = self.cost[e_in];
        let new_pi = if up { self.pi[v_in] - c } else { self.pi[v_in] + c };
        let sigma = new_pi - self.pi[u_in];
        let mut stack = std::mem::take(&mut self.stack);
        stack.clear();
        self.depth[u_in] = self.depth[v_in] + 1;
        self.pi[u_in] += sigma;
        stack.push(u_in);
        while let Some(w) = stack.pop() {
            let dw = self.depth[w] + 1;
            for k in 0..self.children[w].len() {
                let ch = self.children[w][k];
                self.depth[ch] = dw;
                self.pi[ch] += sigma;
                stack.push(ch);
            }
        }
        self.stack = stack;
    }

    /// Pivots until no arc has reduced cost below `-tol`, then recomputes
    /// flows and potentials exactly from the final tree.
    pub fn solve(&mut self) {
        self.block = ((BLOCK_FACTOR * (self.cost.len() as f64).sqrt()) as usize).max(MIN_BLOCK);
        while let Some(e) = self.find_entering() {
            self.pivot(e);
            self.pivots += 1;
        }
        self.refresh();
    }

    fn refresh(&mut self) {
        let mut order = Vec::with_capacity(self.nodes + 1);
        order.push(self.root);
        self.pi[self.root] = 0.0;
        let mut k = 0;
        while k < order.len() {
            let w = order[k];
            k += 1;
            for &ch in &self.children[w] {
                let c = self.cost[self.pred[ch]];
                self.pi[ch] = if self.pred_up[ch] {
                    self.pi[w] - c
                } else {
                    self.pi[w] + c
                };
                self.depth[ch] = self.depth[w] + 1;
                order.push(ch);
            }
        }
        let mut net = vec![0.0; self.nodes + 1];
        net[..self.nodes].copy_from_slice(&self.supply);
        for &w in order.iter().rev() {
            if w == self.root {
                continue;
            }
            let e = self.pred[w];
            self.flow[e] = if self.pred_up[w] { net[w] } else { -net[w] };
            let p = self.parent[w];
            net[p] += net[w];
        }
    }
}
