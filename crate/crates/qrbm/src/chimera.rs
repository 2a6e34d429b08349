//! Software stand-in for a Chimera-topology annealer: graph construction,
//! minor embedding of the RBM's complete bipartite graph, annealing on the
//! physical Ising problem, and chain decoding back to logical variables.
//!
//! A Chimera graph of size `m` is an `m x m` grid of K44 cells. Qubit ids
//! are `8*(row*m + col) + 4*side + k` with side 0 qubits connected
//! vertically between cells and side 1 qubits horizontally.

use std::collections::BTreeMap;

use rand::Rng;

use crate::bits::BitVector;
use crate::rbm::RbmParams;
use crate::rng::stream_rng;
use crate::samplers::{gibbs_sweep, ChainState, SaSchedule, SampleSet, SampleSource, Sampler};
use crate::scalar::{logistic, Scalar};
use crate::{Error, Result};

/// Chimera working graph: ideal `m x m` K44 tiling minus dead qubits.
#[derive(Clone, Debug)]
pub struct ChimeraGraph {
    m: usize,
    alive: Vec<bool>,
    adjacency: Vec<Vec<u32>>,
    edge_count: usize,
}

/// Qubit id for (cell row, cell col, side, in-cell index).
pub fn qubit_id(m: usize, row: usize, col: usize, side: usize, k: usize) -> u32 {
    debug_assert!(row < m && col < m && side < 2 && k < 4);
    (8 * (row * m + col) + 4 * side + k) as u32
}

/// Build a Chimera graph, removing the listed dead qubits and their
/// couplers. Dead ids outside `0..8m^2` are ignored.
pub fn build_chimera(m: usize, dead_qubits: &[u32]) -> ChimeraGraph {
    assert!(m >= 1, "grid size must be at least 1");
    let n = 8 * m * m;
    let mut alive = vec![true; n];
    for &d in dead_qubits {
        if (d as usize) < n {
            alive[d as usize] = false;
        }
    }
    let mut adjacency = vec![Vec::new(); n];
    let mut edge_count = 0;
    let add_edge = |adj: &mut Vec<Vec<u32>>, count: &mut usize, u: u32, v: u32| {
        if alive[u as usize] && alive[v as usize] {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
            *count += 1;
        }
    };
    for row in 0..m {
        for col in 0..m {
            // K44 inside the cell.
            for a in 0..4 {
                for b in 0..4 {
                    add_edge(
                        &mut adjacency,
                        &mut edge_count,
                        qubit_id(m, row, col, 0, a),
                        qubit_id(m, row, col, 1, b),
                    );
                }
            }
            // Side 0 couples vertically to the cell below.
            if row + 1 < m {
                for k in 0..4 {
                    add_edge(
                        &mut adjacency,
                        &mut edge_count,
                        qubit_id(m, row, col, 0, k),
                        qubit_id(m, row + 1, col, 0, k),
                    );
                }
            }
            // Side 1 couples horizontally to the cell on the right.
            if col + 1 < m {
                for k in 0..4 {
                    add_edge(
                        &mut adjacency,
                        &mut edge_count,
                        qubit_id(m, row, col, 1, k),
                        qubit_id(m, row, col + 1, 1, k),
                    );
                }
            }
        }
    }
    for neighbors in &mut adjacency {
        neighbors.sort_unstable();
    }
    ChimeraGraph { m, alive, adjacency, edge_count }
}

impl ChimeraGraph {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_alive(&self, q: u32) -> bool {
        (q as usize) < self.alive.len() && self.alive[q as usize]
    }

    pub fn neighbors(&self, q: u32) -> &[u32] {
        &self.adjacency[q as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.is_alive(u) && self.adjacency[u as usize].binary_search(&v).is_ok()
    }

    /// All couplers as ordered (u < v) pairs.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, neighbors) in self.adjacency.iter().enumerate() {
            for &v in neighbors {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    /// Edge list export, one `u v` line per coupler.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

/// Minor embedding of a complete bipartite RBM graph into a Chimera graph.
///
/// Logical ids `0..n_visible` are visible variables, `n_visible..n_visible +
/// n_hidden` hidden ones. Chains are disjoint connected qubit sets with a
/// coupler between every visible and hidden chain.
#[derive(Clone, Debug)]
pub struct Embedding {
    n_visible: usize,
    n_hidden: usize,
    chains: Vec<Vec<u32>>,
    graph: ChimeraGraph,
}

/// Standard analytic embedding of `K_{n_v, n_h}`: visible variable `i` is a
/// horizontal side-1 chain across `ceil(n_h/4)` cells in row `i/4`, hidden
/// variable `j` a vertical side-0 chain across `ceil(n_v/4)` cells in
/// column `j/4`.
pub fn embed_bipartite(n_v: usize, n_h: usize, graph: &ChimeraGraph) -> Result<Embedding> {
    embed_bipartite_padded(n_v, n_h, n_v, n_h, graph)
}

/// Like [`embed_bipartite`] but laying chains out as if for
/// `K_{pad_v, pad_h}`, so a small model can occupy multi-qubit chains.
pub fn embed_bipartite_padded(
    n_v: usize,
    n_h: usize,
    pad_v: usize,
    pad_h: usize,
    graph: &ChimeraGraph,
) -> Result<Embedding> {
    if n_v == 0 || n_h == 0 {
        return Err(Error::Embedding("layer sizes must be positive".into()));
    }
    if pad_v < n_v || pad_h < n_h {
        return Err(Error::Embedding("padded sizes must cover the model".into()));
    }
    let m = graph.m();
    if pad_v > 4 * m || pad_h > 4 * m {
        return Err(Error::Embedding(format!(
            "K_{{{pad_v},{pad_h}}} exceeds the C_{m} capacity of {0}x{0} logical variables",
            4 * m
        )));
    }
    let rows_used = pad_v.div_ceil(4);
    let cols_used = pad_h.div_ceil(4);
    let mut chains = Vec::with_capacity(n_v + n_h);
    for i in 0..n_v {
        let chain: Vec<u32> =
            (0..cols_used).map(|c| qubit_id(m, i / 4, c, 1, i % 4)).collect();
        require_alive(graph, &chain, &format!("visible {i}"))?;
        chains.push(chain);
    }
    for j in 0..n_h {
        let chain: Vec<u32> =
            (0..rows_used).map(|r| qubit_id(m, r, j / 4, 0, j % 4)).collect();
        require_alive(graph, &chain, &format!("hidden {j}"))?;
        chains.push(chain);
    }
    let embedding =
        Embedding { n_visible: n_v, n_hidden: n_h, chains, graph: graph.clone() };
    embedding.verify()?;
    Ok(embedding)
}

fn require_alive(graph: &ChimeraGraph, chain: &[u32], what: &str) -> Result<()> {
    for &q in chain {
        if !graph.is_alive(q) {
            return Err(Error::Embedding(format!(
                "dead qubit {q} breaks the required chain for {what}"
            )));
        }
    }
    Ok(())
}

impl Embedding {
    /// Build directly from chains (tests and external tools); the result is
    /// verified before use.
    pub fn from_chains(
        n_visible: usize,
        n_hidden: usize,
        chains: Vec<Vec<u32>>,
        graph: ChimeraGraph,
    ) -> Result<Self> {
        let embedding = Embedding { n_visible, n_hidden, chains, graph };
        embedding.verify()?;
        Ok(embedding)
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn chains(&self) -> &[Vec<u32>] {
        &self.chains
    }

    pub fn graph(&self) -> &ChimeraGraph {
        &self.graph
    }

    /// Standalone validity check: chain count, liveness, disjointness,
    /// connectivity, and coverage of every logical bipartite edge.
    pub fn verify(&self) -> Result<()> {
        if self.chains.len() != self.n_visible + self.n_hidden {
            return Err(Error::Embedding(format!(
                "expected {} chains, found {}",
                self.n_visible + self.n_hidden,
                self.chains.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (id, chain) in self.chains.iter().enumerate() {
            if chain.is_empty() {
                return Err(Error::Embedding(format!("chain {id} is empty")));
            }
            for &q in chain {
                if !self.graph.is_alive(q) {
                    return Err(Error::Embedding(format!("chain {id} uses dead qubit {q}")));
                }
                if !seen.insert(q) {
                    return Err(Error::Embedding(format!(
                        "qubit {q} appears in more than one chain"
                    )));
                }
            }
            if !self.chain_is_connected(chain) {
                return Err(Error::Embedding(format!(
                    "chain {id} does not induce a connected subgraph"
                )));
            }
        }
        for i in 0..self.n_visible {
            for j in 0..self.n_hidden {
                if self.couplers_between(i, self.n_visible + j).is_empty() {
                    return Err(Error::Embedding(format!(
                        "no coupler between visible {i} and hidden {j} chains"
                    )));
                }
            }
        }
        Ok(())
    }

    fn chain_is_connected(&self, chain: &[u32]) -> bool {
        let set: std::collections::BTreeSet<u32> = chain.iter().copied().collect();
        let mut visited = std::collections::BTreeSet::new();
        let mut stack = vec![chain[0]];
        while let Some(q) = stack.pop() {
            if !visited.insert(q) {
                continue;
            }
            for &n in self.graph.neighbors(q) {
                if set.contains(&n) && !visited.contains(&n) {
                    stack.push(n);
                }
            }
        }
        visited.len() == set.len()
    }

    /// Physical couplers joining two logical chains.
    pub fn couplers_between(&self, a: usize, b: usize) -> Vec<(u32, u32)> {
        let cb: std::collections::BTreeSet<u32> = self.chains[b].iter().copied().collect();
        let mut out = Vec::new();
        for &u in &self.chains[a] {
            for &v in self.graph.neighbors(u) {
                if cb.contains(&v) {
                    out.push(if u < v { (u, v) } else { (v, u) });
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Physical couplers inside one chain.
    pub fn chain_couplers(&self, id: usize) -> Vec<(u32, u32)> {
        let set: std::collections::BTreeSet<u32> = self.chains[id].iter().copied().collect();
        let mut out = Vec::new();
        for &u in &self.chains[id] {
            for &v in self.graph.neighbors(u) {
                if v > u && set.contains(&v) {
                    out.push((u, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Text form: a header line, then `logical_id: qubit,qubit,...` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("EMB1 {} {}\n", self.n_visible, self.n_hidden);
        for (id, chain) in self.chains.iter().enumerate() {
            let qubits: Vec<String> = chain.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!("{id}: {}\n", qubits.join(",")));
        }
        out
    }

    /// Parse the [`Embedding::to_text`] form against a graph.
    pub fn from_text(text: &str, graph: ChimeraGraph) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty embedding text".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("EMB1") {
            return Err(Error::Parse("embedding text must start with EMB1".into()));
        }
        let n_v: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad n_visible in embedding header".into()))?;
        let n_h: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad n_hidden in embedding header".into()))?;
        let mut chains = vec![Vec::new(); n_v + n_h];
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (id_part, qubit_part) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad embedding line {line:?}")))?;
            let id: usize = id_part
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad logical id in {line:?}")))?;
            if id >= chains.len() {
                return Err(Error::Parse(format!("logical id {id} out of range")));
            }
            chains[id] = qubit_part
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Parse(format!("bad qubit id {tok:?}")))
                })
                .collect::<Result<Vec<u32>>>()?;
        }
        Self::from_chains(n_v, n_h, chains, graph)
    }
}

/// Physical Ising problem: `E(s) = sum_edges J_uv s_u s_v + sum_n h_n s_n`
/// over spins in {-1, +1}.
#[derive(Clone, Debug)]
pub struct IsingProblem<T> {
    pub j: BTreeMap<(u32, u32), T>,
    pub hfield: BTreeMap<u32, T>,
    /// Constant relating RBM and logical Ising energies:
    /// `E_rbm(v,h) = E_ising(s) + offset` for corresponding states.
    pub offset: T,
    /// Factor all couplings and fields were divided by to fit the device
    /// ranges (1 when no rescaling happened).
    pub scale: T,
}

impl<T: Scalar> IsingProblem<T> {
    /// Energy of a full spin assignment.
    pub fn energy_of(&self, spins: &BTreeMap<u32, i8>) -> T {
        let mut e = T::zero();
        for (&(u, v), &jv) in &self.j {
            let su = T::of(spins[&u] as f64);
            let sv = T::of(spins[&v] as f64);
            e = e + jv * su * sv;
        }
        for (&n, &hv) in &self.hfield {
            e = e + hv * T::of(spins[&n] as f64);
        }
        e
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.j.values().map(|x| x.f64().abs()).fold(0.0, f64::max)
    }
}

/// Logical Ising form of the RBM energy: 0/1 units mapped to {-1,+1} spins
/// via `v = (1+s)/2`. Returns (couplings over logical ids, fields, offset).
pub fn logical_ising<T: Scalar>(
    params: &RbmParams<T>,
) -> (BTreeMap<(u32, u32), T>, BTreeMap<u32, T>, T) {
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let quarter = T::of(0.25);
    let half = T::of(0.5);
    let mut j = BTreeMap::new();
    let mut h = BTreeMap::new();
    let mut offset = T::zero();
    let mut row_sums = vec![T::zero(); n_v];
    let mut col_sums = vec![T::zero(); n_h];
    for i in 0..n_v {
        for jj in 0..n_h {
            let w = params.weight(i, jj);
            j.insert((i as u32, (n_v + jj) as u32), -w * quarter);
            row_sums[i] = row_sums[i] + w;
            col_sums[jj] = col_sums[jj] + w;
            offset = offset - w * quarter;
        }
    }
    for i in 0..n_v {
        let bi = params.visible_bias()[i];
        h.insert(i as u32, -row_sums[i] * quarter - bi * half);
        offset = offset - bi * half;
    }
    for jj in 0..n_h {
        let cj = params.hidden_bias()[jj];
        h.insert((n_v + jj) as u32, -col_sums[jj] * quarter - cj * half);
        offset = offset - cj * half;
    }
    (j, h, offset)
}

/// Knobs for the simulated annealer stand-in.
#[derive(Clone, Debug)]
pub struct ChimeraOptions {
    /// Grid size; `None` picks the smallest grid that fits the model.
    pub m: Option<usize>,
    /// Ferromagnetic chain coupling magnitude; `None` uses 1.5 x the
    /// largest |logical Ising coupling| (with a floor of 1).
    pub chain_strength: Option<f64>,
    /// Programmable coupler range; physical J values are rescaled into it.
    pub j_range: (f64, f64),
    /// Programmable field range.
    pub h_range: (f64, f64),
    /// Rescale couplings/fields by a common factor to fit the ranges, as a
    /// coupling-limited device must.
    pub rescale: bool,
}

impl Default for ChimeraOptions {
    fn default() -> Self {
        Self {
            m: None,
            chain_strength: None,
            j_range: (-2.0, 2.0),
            h_range: (-1.0, 1.0),
            rescale: true,
        }
    }
}

/// Default chain strength for a model: 1.5 x max |logical coupling|.
pub fn auto_chain_strength<T: Scalar>(params: &RbmParams<T>) -> f64 {
    let max_j = params.max_abs_coupling() / 4.0;
    if max_j > 0.0 {
        1.5 * max_j
    } else {
        1.0
    }
}

/// Distribute the logical Ising problem over an embedding: logical edge
/// weights split equally across chain-to-chain couplers, logical fields
/// split equally across chain members, intra-chain couplers set to
/// `-chain_strength`.
pub fn embed_problem<T: Scalar>(
    params: &RbmParams<T>,
    embedding: &Embedding,
    chain_strength: T,
) -> Result<IsingProblem<T>> {
    embed_problem_with(params, embedding, chain_strength, &ChimeraOptions::default())
}

/// [`embed_problem`] with explicit device ranges and rescaling control.
pub fn embed_problem_with<T: Scalar>(
    params: &RbmParams<T>,
    embedding: &Embedding,
    chain_strength: T,
    options: &ChimeraOptions,
) -> Result<IsingProblem<T>> {
    if chain_strength <= T::zero() {
        return Err(Error::InvalidConfig("chain_strength must be positive".into()));
    }
    if embedding.n_visible() != params.n_visible() || embedding.n_hidden() != params.n_hidden()
    {
        return Err(Error::DimensionMismatch(format!(
            "embedding covers K_{{{},{}}} but the model is {}x{}",
            embedding.n_visible(),
            embedding.n_hidden(),
            params.n_visible(),
            params.n_hidden()
        )));
    }
    let (logical_j, logical_h, offset) = logical_ising(params);
    let mut j: BTreeMap<(u32, u32), T> = BTreeMap::new();
    let mut hfield: BTreeMap<u32, T> = BTreeMap::new();
    for (&(a, b), &weight) in &logical_j {
        let couplers = embedding.couplers_between(a as usize, b as usize);
        let share = weight / T::of(couplers.len() as f64);
        for edge in couplers {
            let entry = j.entry(edge).or_insert_with(T::zero);
            *entry = *entry + share;
        }
    }
    for (&a, &field) in &logical_h {
        let chain = &embedding.chains()[a as usize];
        let share = field / T::of(chain.len() as f64);
        for &q in chain {
            let entry = hfield.entry(q).or_insert_with(T::zero);
            *entry = *entry + share;
        }
    }
    for id in 0..embedding.chains().len() {
        for edge in embedding.chain_couplers(id) {
            j.insert(edge, -chain_strength);
        }
    }
    // Every chain qubit participates, even with a zero field.
    for chain in embedding.chains() {
        for &q in chain {
            hfield.entry(q).or_insert_with(T::zero);
        }
    }
    let mut scale = T::one();
    if options.rescale {
        let j_cap = options.j_range.1.min(-options.j_range.0);
        let h_cap = options.h_range.1.min(-options.h_range.0);
        if j_cap <= 0.0 || h_cap <= 0.0 {
            return Err(Error::InvalidConfig("device ranges must straddle zero".into()));
        }
        let max_j = j.values().map(|x| x.f64().abs()).fold(0.0, f64::max);
        let max_h = hfield.values().map(|x| x.f64().abs()).fold(0.0, f64::max);
        let factor = (max_j / j_cap).max(max_h / h_cap).max(1.0);
        if factor > 1.0 {
            scale = T::of(factor);
            for v in j.values_mut() {
                *v = *v / scale;
            }
            for v in hfield.values_mut() {
                *v = *v / scale;
            }
        }
        let clamp = |x: T, lo: f64, hi: f64| x.max(T::of(lo)).min(T::of(hi));
        for v in j.values_mut() {
            *v = clamp(*v, options.j_range.0, options.j_range.1);
        }
        for v in hfield.values_mut() {
            *v = clamp(*v, options.h_range.0, options.h_range.1);
        }
    }
    Ok(IsingProblem { j, hfield, offset, scale })
}

/// Compact physical problem layout for the annealing inner loop.
struct PhysicalLayout<T> {
    nodes: Vec<u32>,
    field: Vec<T>,
    adjacency: Vec<Vec<(usize, T)>>,
    /// Per logical chain: member spin indices. Chain couplers freeze well
    /// before the logical variables order, so each sweep also proposes
    /// whole-chain Metropolis flips (a symmetric move that leaves the
    /// Boltzmann distribution invariant).
    chains: Vec<Vec<usize>>,
}

impl<T: Scalar> PhysicalLayout<T> {
    fn build(problem: &IsingProblem<T>, embedding: &Embedding) -> Self {
        let nodes: Vec<u32> = problem.hfield.keys().copied().collect();
        let index: BTreeMap<u32, usize> =
            nodes.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let field: Vec<T> = nodes.iter().map(|q| problem.hfield[q]).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (&(u, v), &w) in &problem.j {
            let (iu, iv) = (index[&u], index[&v]);
            adjacency[iu].push((iv, w));
            adjacency[iv].push((iu, w));
        }
        let chains = embedding
            .chains()
            .iter()
            .map(|chain| chain.iter().map(|q| index[q]).collect())
            .collect();
        Self { nodes, field, adjacency, chains }
    }

    /// One sweep: a heat-bath pass over all spins in node order, then one
    /// Metropolis whole-chain flip proposal per logical chain.
    fn sweep<R: Rng>(&self, spins: &mut [i8], beta: f64, rng: &mut R) {
        for i in 0..spins.len() {
            let mut local = self.field[i].f64();
            for &(n, w) in &self.adjacency[i] {
                local += w.f64() * spins[n] as f64;
            }
            let p_up = logistic(-2.0 * beta * local);
            spins[i] = if rng.gen::<f64>() < p_up { 1 } else { -1 };
        }
        for chain in &self.chains {
            // Flipping every member negates field terms and boundary
            // couplings; intra-chain couplings are unchanged.
            let mut delta = 0.0;
            for &i in chain {
                delta += self.field[i].f64() * spins[i] as f64;
                for &(n, w) in &self.adjacency[i] {
                    if !chain.contains(&n) {
                        delta += w.f64() * spins[i] as f64 * spins[n] as f64;
                    }
                }
            }
            let delta_e = -2.0 * delta;
            if delta_e <= 0.0 || rng.gen::<f64>() < (-beta * delta_e).exp() {
                for &i in chain {
                    spins[i] = -spins[i];
                }
            }
        }
    }
}

/// Anneal on the embedded physical problem and decode chains by majority
/// vote (ties broken by the run's RNG stream), then apply post-anneal Gibbs
/// sweeps on the logical RBM.
pub fn chimera_sample<T: Scalar>(
    params: &RbmParams<T>,
    embedding: &Embedding,
    config: &crate::samplers::SamplerConfig,
) -> Result<SampleSet<T>> {
    config.validate()?;
    let strength = config
        .chimera
        .chain_strength
        .unwrap_or_else(|| auto_chain_strength(params));
    let problem = embed_problem_with(params, embedding, T::of(strength), &config.chimera)?;
    let layout = PhysicalLayout::build(&problem, embedding);
    let chain_indices: Vec<Vec<usize>> = embedding
        .chains()
        .iter()
        .map(|chain| {
            chain
                .iter()
                .map(|q| layout.nodes.binary_search(q).expect("chain qubit in layout"))
                .collect()
        })
        .collect();
    let n_v = params.n_visible();
    let n_h = params.n_hidden();
    let mut states = Vec::with_capacity(config.n_samples);
    let mut broken_total = 0usize;
    for run in 0..config.n_samples {
        let mut rng = stream_rng(config.rng_seed, run as u64);
        let mut spins: Vec<i8> =
            (0..layout.nodes.len()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        for s in 0..config.sa_schedule.n_sweeps {
            layout.sweep(&mut spins, config.sa_schedule.beta_at(s), &mut rng);
        }
        let mut bits = Vec::with_capacity(n_v + n_h);
        for chain in &chain_indices {
            let total: i32 = chain.iter().map(|&i| spins[i] as i32).sum();
            if total.unsigned_abs() as usize != chain.len() {
                broken_total += 1;
            }
            let bit = match total.cmp(&0) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => u8::from(rng.gen::<bool>()),
            };
            bits.push(bit);
        }
        let mut state = ChainState {
            v: BitVector::from_bits(&bits[..n_v])?,
            h: BitVector::from_bits(&bits[n_v..])?,
        };
        for _ in 0..config.gibbs_postprocess_sweeps {
            gibbs_sweep(params, &mut state, &mut rng)?;
        }
        states.push((state.v, state.h));
    }
    let mut set = SampleSet::new(params, states, SampleSource::Chimera)?;
    set.broken_chain_fraction =
        Some(broken_total as f64 / (config.n_samples * (n_v + n_h)) as f64);
    Ok(set)
}

/// [`Sampler`] wrapper that embeds the model on demand.
#[derive(Clone, Debug)]
pub struct ChimeraSampler {
    pub options: ChimeraOptions,
    pub schedule: SaSchedule,
    pub postprocess_sweeps: usize,
}

impl<T: Scalar> Sampler<T> for ChimeraSampler {
    fn draw(&self, params: &RbmParams<T>, n_samples: usize, seed: u64) -> Result<SampleSet<T>> {
        let m = self
            .options
            .m
            .unwrap_or_else(|| params.n_visible().max(params.n_hidden()).div_ceil(4));
        let graph = build_chimera(m, &[]);
        let embedding = embed_bipartite(params.n_visible(), params.n_hidden(), &graph)?;
        let mut config = crate::samplers::SamplerConfig::new(crate::samplers::SamplerKind::Chimera);
        config.chimera = self.options.clone();
        config.sa_schedule = self.schedule;
        config.gibbs_postprocess_sweeps = self.postprocess_sweeps;
        config.n_samples = n_samples;
        config.rng_seed = seed;
        chimera_sample(params, &embedding, &config)
    }

    fn source(&self) -> SampleSource {
        SampleSource::Chimera
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{SamplerConfig, SamplerKind};
    use rand::Rng;

    fn random_params(n_v: usize, n_h: usize, seed: u64, scale: f64) -> RbmParams<f64> {
        let mut rng = stream_rng(seed, 0);
        let w = (0..n_v * n_h).map(|_| rng.gen_range(-scale..scale)).collect();
        let b = (0..n_v).map(|_| rng.gen_range(-scale..scale)).collect();
        let c = (0..n_h).map(|_| rng.gen_range(-scale..scale)).collect();
        RbmParams::from_parts(n_v, n_h, w, b, c).unwrap()
    }

    #[test]
    fn chimera_counts_match_formulas() {
        for m in [1usize, 2, 3, 16] {
            let g = build_chimera(m, &[]);
            assert_eq!(g.node_count(), 8 * m * m);
            assert_eq!(g.edge_count(), 16 * m * m + 8 * m * (m - 1));
        }
        // The 2048-qubit device scale is C16.
        assert_eq!(build_chimera(16, &[]).node_count(), 2048);
    }

    #[test]
    fn chimera_m2_explicit_edge_count() {
        let g = build_chimera(2, &[]);
        assert_eq!(g.node_count(), 32);
        assert_eq!(g.edge_count(), 80);
        // Intra-cell vs inter-cell split.
        let (mut intra, mut inter) = (0, 0);
        for (u, v) in g.edges() {
            if u / 8 == v / 8 {
                intra += 1;
            } else {
                inter += 1;
            }
        }
        assert_eq!(intra, 64);
        assert_eq!(inter, 16);
    }

    #[test]
    fn dead_qubits_remove_nodes_and_couplers() {
        let g = build_chimera(1, &[0]);
        assert_eq!(g.node_count(), 7);
        assert_eq!(g.edge_count(), 12);
        assert!(!g.is_alive(0));
    }

    #[test]
    fn k44_into_c1_uses_singleton_chains() {
        let g = build_chimera(1, &[]);
        let emb = embed_bipartite(4, 4, &g).unwrap();
        assert!(emb.chains().iter().all(|c| c.len() == 1));
        emb.verify().unwrap();
    }

    #[test]
    fn k88_into_c2_uses_length_two_chains() {
        let g = build_chimera(2, &[]);
        let emb = embed_bipartite(8, 8, &g).unwrap();
        assert_eq!(emb.chains().len(), 16);
        assert!(emb.chains().iter().all(|c| c.len() == 2));
        emb.verify().unwrap();
    }

    #[test]
    fn k54_exceeds_c1_capacity() {
        let g = build_chimera(1, &[]);
        assert!(embed_bipartite(5, 4, &g).is_err());
    }

    #[test]
    fn dead_qubit_on_required_chain_is_an_error() {
        let g = build_chimera(1, &[qubit_id(1, 0, 0, 1, 0)]);
        assert!(embed_bipartite(4, 4, &g).is_err());
        // A dead qubit outside the needed region is fine.
        let g = build_chimera(2, &[qubit_id(2, 1, 1, 0, 3)]);
        assert!(embed_bipartite(4, 4, &g).is_ok());
    }

    #[test]
    fn edge_list_export_matches_edges() {
        let g = build_chimera(1, &[]);
        let text = g.edge_list_text();
        assert_eq!(text.lines().count(), 16);
        assert!(text.lines().all(|line| {
            let mut it = line.split_whitespace();
            let u: u32 = it.next().unwrap().parse().unwrap();
            let v: u32 = it.next().unwrap().parse().unwrap();
            g.has_edge(u, v)
        }));
    }

    #[test]
    fn embedding_text_round_trips() {
        let g = build_chimera(2, &[]);
        let emb = embed_bipartite(6, 5, &g).unwrap();
        let text = emb.to_text();
        let back = Embedding::from_text(&text, g).unwrap();
        assert_eq!(emb.chains(), back.chains());
    }

    #[test]
    fn qubo_ising_energies_differ_by_constant() {
        let p = random_params(3, 3, 7, 1.0);
        let (j, h, offset) = logical_ising(&p);
        let problem = IsingProblem { j, hfield: h, offset, scale: 1.0 };
        for vi in 0..8usize {
            for hi in 0..8usize {
                let v = BitVector::from_index(vi, 3);
                let hh = BitVector::from_index(hi, 3);
                let mut spins = BTreeMap::new();
                for i in 0..3 {
                    spins.insert(i as u32, if v.get(i) == 1 { 1 } else { -1 });
                    spins.insert((3 + i) as u32, if hh.get(i) == 1 { 1 } else { -1 });
                }
                let e_rbm = p.energy(&v, &hh).unwrap();
                let e_ising = problem.energy_of(&spins);
                assert!((e_rbm - (e_ising + offset)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singleton_chains_reproduce_logical_problem() {
        let p = random_params(4, 4, 11, 1.0);
        let g = build_chimera(1, &[]);
        let emb = embed_bipartite(4, 4, &g).unwrap();
        let problem = embed_problem(&p, &emb, 1.0).unwrap();
        let (logical_j, logical_h, _) = logical_ising(&p);
        assert_eq!(problem.scale, 1.0);
        for (&(a, b), &w) in &logical_j {
            let qa = emb.chains()[a as usize][0];
            let qb = emb.chains()[b as usize][0];
            let key = if qa < qb { (qa, qb) } else { (qb, qa) };
            assert!((problem.j[&key] - w).abs() < 1e-15);
        }
        for (&a, &f) in &logical_h {
            let q = emb.chains()[a as usize][0];
            assert!((problem.hfield[&q] - f).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_splits_equally_over_chain_members() {
        // 1 visible, 1 hidden, embedded with padded length-2 chains.
        let p = RbmParams::<f64>::from_parts(1, 1, vec![0.0], vec![3.0], vec![0.0]).unwrap();
        let g = build_chimera(2, &[]);
        let emb = embed_bipartite_padded(1, 1, 8, 8, &g).unwrap();
        let mut options = ChimeraOptions::default();
        options.rescale = false;
        let problem = embed_problem_with(&p, &emb, 2.5, &options).unwrap();
        // Logical field of the visible variable is -3/2, split over 2 qubits.
        for &q in &emb.chains()[0] {
            assert!((problem.hfield[&q] - (-0.75)).abs() < 1e-15);
        }
        for edge in emb.chain_couplers(0) {
            assert!((problem.j[&edge] - (-2.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn unbroken_chain_energy_has_no_leakage() {
        let p = random_params(5, 4, 13, 1.0);
        let g = build_chimera(2, &[]);
        let emb = embed_bipartite(5, 4, &g).unwrap();
        let strength = 3.0;
        let mut options = ChimeraOptions::default();
        options.rescale = false;
        let problem = embed_problem_with(&p, &emb, strength, &options).unwrap();
        let n_chain_edges: usize =
            (0..emb.chains().len()).map(|id| emb.chain_couplers(id).len()).sum();
        let mut rng = stream_rng(17, 0);
        for _ in 0..20 {
            let v = BitVector::from_index(rng.gen_range(0..32), 5);
            let h = BitVector::from_index(rng.gen_range(0..16), 4);
            let mut spins = BTreeMap::new();
            for (id, chain) in emb.chains().iter().enumerate() {
                let bit = if id < 5 { v.get(id) } else { h.get(id - 5) };
                for &q in chain {
                    spins.insert(q, if bit == 1 { 1i8 } else { -1 });
                }
            }
            let e_phys = problem.energy_of(&spins);
            let e_rbm = p.energy(&v, &h).unwrap();
            // Aligned chains contribute exactly -strength per chain coupler.
            let chain_term = -strength * n_chain_edges as f64;
            assert!(
                (e_phys - ((e_rbm - problem.offset) + chain_term)).abs() < 1e-10,
                "physical {e_phys} vs logical {}",
                (e_rbm - problem.offset) + chain_term
            );
        }
    }

    #[test]
    fn strong_chains_decode_to_logical_ground_state() {
        let p = random_params(4, 4, 19, 1.0);
        // Logical ground state by enumeration.
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for vi in 0..16 {
            for hi in 0..16 {
                let v = BitVector::from_index(vi, 4);
                let h = BitVector::from_index(hi, 4);
                let e = p.energy(&v, &h).unwrap();
                if e < best.0 {
                    best = (e, vi, hi);
                }
            }
        }
        // Physical ground state by enumeration over 16 qubits (padded
        // chains of length 2), with strong chains and no rescaling.
        let g = build_chimera(2, &[]);
        let emb = embed_bipartite_padded(4, 4, 8, 8, &g).unwrap();
        let strength = 2.0 * p.max_abs_coupling() / 4.0 + 1.0;
        let mut options = ChimeraOptions::default();
        options.rescale = false;
        let problem = embed_problem_with(&p, &emb, strength, &options).unwrap();
        let nodes: Vec<u32> = problem.hfield.keys().copied().collect();
        assert_eq!(nodes.len(), 16);
        let mut best_phys = (f64::INFINITY, 0usize);
        for assignment in 0..(1usize << 16) {
            let spins: BTreeMap<u32, i8> = nodes
                .iter()
                .enumerate()
                .map(|(i, &q)| (q, if (assignment >> i) & 1 == 1 { 1i8 } else { -1 }))
                .collect();
            let e = problem.energy_of(&spins);
            if e < best_phys.0 {
                best_phys = (e, assignment);
            }
        }
        // Decode the physical ground state chain by chain.
        let spins: BTreeMap<u32, i8> = nodes
            .iter()
            .enumerate()
            .map(|(i, &q)| (q, if (best_phys.1 >> i) & 1 == 1 { 1i8 } else { -1 }))
            .collect();
        let mut decoded = Vec::new();
        for chain in emb.chains() {
            let total: i32 = chain.iter().map(|q| spins[q] as i32).sum();
            assert_eq!(total.unsigned_abs() as usize, chain.len(), "broken ground-state chain");
            decoded.push(u8::from(total > 0));
        }
        let v_idx = BitVector::from_bits(&decoded[..4]).unwrap().to_index();
        let h_idx = BitVector::from_bits(&decoded[4..]).unwrap().to_index();
        assert_eq!((v_idx, h_idx), (best.1, best.2));
    }

    #[test]
    fn singleton_chimera_matches_logical_sa_distribution() {
        let p = random_params(3, 3, 23, 1.0);
        let g = build_chimera(1, &[]);
        let emb = embed_bipartite(3, 3, &g).unwrap();
        let mut cfg = SamplerConfig::new(SamplerKind::Chimera).with_seed(29);
        cfg.sa_schedule = SaSchedule { beta_start: 1.0, beta_end: 1.0, n_sweeps: 250 };
        cfg.gibbs_postprocess_sweeps = 0;
        cfg.n_samples = 3000;
        let chimera = chimera_sample(&p, &emb, &cfg).unwrap();
        assert!(chimera.broken_chain_fraction.unwrap() == 0.0);
        let reference = crate::samplers::exact_sample(&p, 3000, 31).unwrap();
        let ks = crate::thermometry::ks_two_sample(&chimera.energies, &reference.energies)
            .unwrap();
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
    }

    #[test]
    fn strong_chains_rarely_break() {
        let p = random_params(4, 4, 37, 1.0);
        let g = build_chimera(2, &[]);
        let emb = embed_bipartite_padded(4, 4, 8, 8, &g).unwrap();
        let mut cfg = SamplerConfig::new(SamplerKind::Chimera).with_seed(41);
        cfg.chimera.chain_strength = Some(10.0 * p.max_abs_coupling() / 4.0);
        cfg.sa_schedule = SaSchedule { beta_start: 0.2, beta_end: 5.0, n_sweeps: 100 };
        cfg.gibbs_postprocess_sweeps = 0;
        cfg.n_samples = 1000;
        let out = chimera_sample(&p, &emb, &cfg).unwrap();
        assert!(out.broken_chain_fraction.unwrap() <= 0.01,
            "broken fraction {}", out.broken_chain_fraction.unwrap());
    }

    #[test]
    fn weak_chains_break_on_frustrated_instances() {
        // Strong couplings, opposing biases, near-zero chain strength.
        let p = RbmParams::from_parts(
            2,
            2,
            vec![6.0, -6.0, -6.0, 6.0],
            vec![3.0, 3.0],
            vec![3.0, 3.0],
        )
        .unwrap();
        let g = build_chimera(2, &[]);
        let chains = vec![
            vec![qubit_id(2, 0, 0, 1, 0), qubit_id(2, 0, 1, 1, 0)],
            vec![qubit_id(2, 0, 0, 1, 1), qubit_id(2, 0, 1, 1, 1)],
            vec![qubit_id(2, 0, 0, 0, 0), qubit_id(2, 1, 0, 0, 0)],
            vec![qubit_id(2, 0, 0, 0, 1), qubit_id(2, 1, 0, 0, 1)],
        ];
        let emb = Embedding::from_chains(2, 2, chains, g).unwrap();
        let mut cfg = SamplerConfig::new(SamplerKind::Chimera).with_seed(43);
        cfg.chimera.chain_strength = Some(0.01);
        cfg.sa_schedule = SaSchedule { beta_start: 0.2, beta_end: 1.0, n_sweeps: 50 };
        cfg.gibbs_postprocess_sweeps = 0;
        cfg.n_samples = 500;
        let out = chimera_sample(&p, &emb, &cfg).unwrap();
        assert!(out.broken_chain_fraction.unwrap() > 0.0);
    }

    #[test]
    fn rescaling_clips_to_device_ranges() {
        let p = random_params(3, 3, 47, 12.0);
        let g = build_chimera(1, &[]);
        let emb = embed_bipartite(3, 3, &g).unwrap();
        let problem = embed_problem(&p, &emb, 1.0).unwrap();
        assert!(problem.scale > 1.0);
        assert!(problem.j.values().all(|v| (-2.0..=2.0).contains(&v.f64())));
        assert!(problem.hfield.values().all(|v| (-1.0..=1.0).contains(&v.f64())));
    }

    #[test]
    fn chain_strength_must_be_positive() {
        let p = random_params(2, 2, 53, 1.0);
        let g = build_chimera(1, &[]);
        let emb = embed_bipartite(2, 2, &g).unwrap();
        assert!(embed_problem(&p, &emb, 0.0).is_err());
        assert!(embed_problem(&p, &emb, -1.0).is_err());
    }
}
