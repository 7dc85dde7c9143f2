//! Invariant message-passing potential.
//!
//! Atoms start from a learned embedding of their species. Each interaction
//! block builds a continuous filter from the radial basis of every pair
//! distance (two dense layers, scaled by the cosine envelope), multiplies it
//! element-wise with linearly mixed sender features, sums the messages per
//! receiver and adds a two-layer update to the receiver features. A small
//! head maps final features to per-atom energies.
//!
//! Geometry only enters through pair distances, so forces are the reverse
//! pass down to `dE/dd` per pair followed by the distance pullback of the
//! neighbor engine. Parameter gradients come from the same reverse pass.

mod config;
mod params;
mod rbf;

use std::borrow::Cow;

pub use config::{Activation, GNConfig};
pub use params::{Dense, GNParams, InteractionParams};
pub use rbf::{initial_params as rbf_initial_params, rbf_expnorm};

pub use crate::cutoff::cosine_cutoff;
use crate::cutoff::cosine_cutoff_with_grad;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::neighbor::{distance_pullback, NeighborList, SENTINEL};
use crate::system::{EnergyForces, System};

/// Batch code marking the ghost atom of a padded input.
const GHOST: usize = usize::MAX;

#[inline]
fn mix(h: u64, v: u64) -> u64 {
    (h ^ v).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(29)
}

pub(crate) fn mix_slice(h: u64, values: &[f64]) -> u64 {
    values
        .iter()
        .fold(mix(h, values.len() as u64), |h, v| mix(h, v.to_bits()))
}

/// Parameters together with the hyperparameters they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPotential {
    pub config: GNConfig,
    pub params: GNParams,
}

impl GraphPotential {
    pub fn new(config: GNConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = GNParams::init(&config, seed);
        Ok(GraphPotential { config, params })
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList, derivative: bool) -> Result<EnergyForces> {
        energy_and_forces(&self.params, &self.config, system, list, derivative)
    }
}

/// A system extended by one ghost atom, with every unused neighbor slot
/// re-pointed to a ghost-ghost pair at distance `cutoff_upper`.
#[derive(Debug, Clone)]
pub struct PaddedInput {
    pub species: Vec<u32>,
    pub batch: Vec<usize>,
    pub n_samples: usize,
    pub neighbors: NeighborList,
    pub ghost: usize,
}

/// Node data and edges seen by the network.
struct Graph<'a> {
    species: Cow<'a, [u32]>,
    batch: Cow<'a, [usize]>,
    n_samples: usize,
    list: &'a NeighborList,
}

impl<'a> Graph<'a> {
    fn from_system(system: &'a System, list: &'a NeighborList) -> Result<Self> {
        if list.n_atoms() != system.len() {
            return Err(Error::LengthMismatch {
                what: "neighbor list atoms",
                expected: system.len(),
                found: list.n_atoms(),
            });
        }
        Ok(Graph {
            species: Cow::Borrowed(system.species()),
            batch: Cow::Borrowed(system.batch()),
            n_samples: system.n_samples(),
            list,
        })
    }

    fn from_padded(padded: &'a PaddedInput) -> Self {
        Graph {
            species: Cow::Borrowed(&padded.species),
            batch: Cow::Borrowed(&padded.batch),
            n_samples: padded.n_samples,
            list: &padded.neighbors,
        }
    }

    fn n_nodes(&self) -> usize {
        self.species.len()
    }

    fn fingerprint(&self, params: &GNParams, config: &GNConfig) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325;
        for &z in self.species.iter() {
            h = mix(h, z as u64);
        }
        for &b in self.batch.iter() {
            h = mix(h, b as u64);
        }
        h = mix(h, self.list.count() as u64);
        for p in self.list.pairs() {
            h = mix(h, ((p[0] as u32 as u64) << 32) | p[1] as u32 as u64);
        }
        h = mix_slice(h, self.list.distances());
        h = mix_slice(
            h,
            &[config.cutoff_lower, config.cutoff_upper, config.mean, config.std],
        );
        params.fingerprint(h)
    }
}

struct LayerCache {
    x_in: Vec<f64>,
    h: Vec<f64>,
    filter_pre: Vec<f64>,
    filter_act: Vec<f64>,
    filter_out: Vec<f64>,
    m: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

/// Activations kept from a forward pass for the reverse pass.
pub struct ForwardCache {
    fingerprint: u64,
    /// Neighbor slots that carry an edge, in processing order.
    slots: Vec<usize>,
    /// (local slot index, receiver, sender)
    edges: Vec<(usize, usize, usize)>,
    rbf: Vec<f64>,
    envelope: Vec<(f64, f64)>,
    layers: Vec<LayerCache>,
    x_final: Vec<f64>,
    head_pre: Vec<f64>,
    head_act: Vec<f64>,
}

fn check_cutoffs(config: &GNConfig, list: &NeighborList) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    if !close(config.cutoff_lower, list.cutoff_lower())
        || !close(config.cutoff_upper, list.cutoff_upper())
    {
        return Err(Error::CutoffMismatch {
            expected_lower: config.cutoff_lower,
            expected_upper: config.cutoff_upper,
            found_lower: list.cutoff_lower(),
            found_upper: list.cutoff_upper(),
        });
    }
    Ok(())
}

fn forward_impl(params: &GNParams, config: &GNConfig, g: &Graph) -> Result<(EnergyForces, ForwardCache)> {
    config.validate()?;
    check_cutoffs(config, g.list)?;
    let n = g.n_nodes();
    let f = config.embedding_dimension;
    let k_rbf = config.num_rbf;
    let hd = config.head_dimension();
    let act = config.activation;
    for (&z, &b) in g.species.iter().zip(g.batch.iter()) {
        if b != GHOST && z as usize >= config.max_z {
            return Err(Error::SpeciesOutOfRange {
                species: z,
                max_z: config.max_z,
            });
        }
    }

    // Edges: a half list is expanded into both directions, loops once.
    let list = g.list;
    let mut slots = Vec::new();
    let mut edges = Vec::new();
    if config.num_layers > 0 {
        for (slot, p) in list.pairs().iter().enumerate() {
            if p[0] == SENTINEL {
                continue;
            }
            let (i, j) = (p[0] as usize, p[1] as usize);
            let local = slots.len();
            slots.push(slot);
            edges.push((local, i, j));
            if !list.is_full() && i != j {
                edges.push((local, j, i));
            }
        }
    }
    let n_slots = slots.len();
    let mut rbf = vec![0.0; n_slots * k_rbf];
    let mut envelope = vec![(0.0, 0.0); n_slots];
    for (local, &slot) in slots.iter().enumerate() {
        let d = list.distances()[slot];
        rbf_expnorm(
            d,
            &params.rbf_means,
            &params.rbf_betas,
            config.cutoff_lower,
            &mut rbf[local * k_rbf..(local + 1) * k_rbf],
        );
        envelope[local] = cosine_cutoff_with_grad(d, config.cutoff_lower, config.cutoff_upper);
    }

    let mut x = vec![0.0; n * f];
    for i in 0..n {
        if g.batch[i] == GHOST {
            continue;
        }
        let z = g.species[i] as usize;
        x[i * f..(i + 1) * f].copy_from_slice(&params.embedding[z * f..(z + 1) * f]);
    }

    let mut layers = Vec::with_capacity(config.num_layers);
    for lp in &params.layers {
        let mut h = vec![0.0; n * f];
        for i in 0..n {
            lp.premix.apply(&x[i * f..(i + 1) * f], &mut h[i * f..(i + 1) * f]);
        }
        let mut filter_pre = vec![0.0; n_slots * f];
        let mut filter_act = vec![0.0; n_slots * f];
        let mut filter_out = vec![0.0; n_slots * f];
        for e in 0..n_slots {
            let span = e * f..(e + 1) * f;
            lp.filter1.apply(&rbf[e * k_rbf..(e + 1) * k_rbf], &mut filter_pre[span.clone()]);
            for c in span.clone() {
                filter_act[c] = act.eval(filter_pre[c]).0;
            }
            lp.filter2.apply(&filter_act[span.clone()], &mut filter_out[span]);
        }
        let mut m = vec![0.0; n * f];
        for &(e, r, s) in &edges {
            let phi = envelope[e].0;
            for c in 0..f {
                m[r * f + c] += h[s * f + c] * filter_out[e * f + c] * phi;
            }
        }
        let mut p = vec![0.0; n * f];
        let mut q = vec![0.0; n * f];
        let mut u = vec![0.0; f];
        let x_in = x.clone();
        for i in 0..n {
            let span = i * f..(i + 1) * f;
            lp.post1.apply(&m[span.clone()], &mut p[span.clone()]);
            for c in span.clone() {
                q[c] = act.eval(p[c]).0;
            }
            lp.post2.apply(&q[span.clone()], &mut u);
            for (xc, uc) in x[span].iter_mut().zip(&u) {
                *xc += uc;
            }
        }
        layers.push(LayerCache {
            x_in,
            h,
            filter_pre,
            filter_act,
            filter_out,
            m,
            p,
            q,
        });
    }

    let mut head_pre = vec![0.0; n * hd];
    let mut head_act = vec![0.0; n * hd];
    let mut per_atom = Vec::with_capacity(n);
    let mut energy = vec![0.0; g.n_samples];
    let mut y = [0.0];
    for i in 0..n {
        let span = i * hd..(i + 1) * hd;
        params.head1.apply(&x[i * f..(i + 1) * f], &mut head_pre[span.clone()]);
        for c in span.clone() {
            head_act[c] = act.eval(head_pre[c]).0;
        }
        if g.batch[i] == GHOST {
            continue;
        }
        params.head2.apply(&head_act[span], &mut y);
        let mut yi = y[0] * config.std + config.mean;
        if let Some(table) = &params.atomref {
            yi += table[g.species[i] as usize];
        }
        energy[g.batch[i]] += yi;
        per_atom.push(yi);
    }

    let cache = ForwardCache {
        fingerprint: g.fingerprint(params, config),
        slots,
        edges,
        rbf,
        envelope,
        layers,
        x_final: x,
        head_pre,
        head_act,
    };
    Ok((
        EnergyForces {
            energy,
            forces: None,
            per_atom_energy: Some(per_atom),
        },
        cache,
    ))
}

/// Reverse pass for upstream per-sample gradients. Returns `dE/dd` per
/// neighbor slot and, if requested, parameter gradients.
fn backward_impl(
    params: &GNParams,
    config: &GNConfig,
    g: &Graph,
    cache: &ForwardCache,
    upstream: &[f64],
    want_params: bool,
) -> Result<(Vec<f64>, Option<GNParams>)> {
    if cache.fingerprint != g.fingerprint(params, config) {
        return Err(Error::StaleCache);
    }
    if upstream.len() != g.n_samples {
        return Err(Error::LengthMismatch {
            what: "upstream energy gradients",
            expected: g.n_samples,
            found: upstream.len(),
        });
    }
    let n = g.n_nodes();
    let f = config.embedding_dimension;
    let k_rbf = config.num_rbf;
    let hd = config.head_dimension();
    let act = config.activation;
    let n_slots = cache.slots.len();
    let mut grads = want_params.then(|| params.zeros_like());

    // Head.
    let mut dx = vec![0.0; n * f];
    let mut dhead = vec![0.0; hd];
    for i in 0..n {
        if g.batch[i] == GHOST {
            continue;
        }
        let gi = upstream[g.batch[i]];
        if gi == 0.0 {
            continue;
        }
        let dy = [gi * config.std];
        let span = i * hd..(i + 1) * hd;
        dhead.fill(0.0);
        params.head2.backprop_input(&dy, &mut dhead);
        for (c, dh) in span.clone().zip(dhead.iter_mut()) {
            *dh *= act.eval(cache.head_pre[c]).1;
        }
        params.head1.backprop_input(&dhead, &mut dx[i * f..(i + 1) * f]);
        if let Some(gr) = grads.as_mut() {
            gr.head2.accumulate(&cache.head_act[span], &dy);
            gr.head1.accumulate(&cache.x_final[i * f..(i + 1) * f], &dhead);
            if let Some(table) = gr.atomref.as_mut() {
                table[g.species[i] as usize] += gi;
            }
        }
    }

    let mut d_dist_local = vec![0.0; n_slots];
    let mut d_rbf = vec![0.0; n_slots * k_rbf];
    let mut dp = vec![0.0; f];
    let mut dq = vec![0.0; f];
    let mut da = vec![0.0; f];
    let mut ds = vec![0.0; f];
    for (l, (lp, lc)) in params.layers.iter().zip(&cache.layers).enumerate().rev() {
        // Update path: u = post2(act(post1(m))).
        let mut dm = vec![0.0; n * f];
        for i in 0..n {
            let span = i * f..(i + 1) * f;
            let du = &dx[span.clone()];
            if du.iter().all(|&v| v == 0.0) {
                continue;
            }
            dq.fill(0.0);
            lp.post2.backprop_input(du, &mut dq);
            for (c, dpc) in span.clone().zip(dp.iter_mut()) {
                *dpc = dq[c - i * f] * act.eval(lc.p[c]).1;
            }
            lp.post1.backprop_input(&dp, &mut dm[span.clone()]);
            if let Some(gr) = grads.as_mut() {
                let gl = &mut gr.layers[l];
                gl.post2.accumulate(&lc.q[span.clone()], du);
                gl.post1.accumulate(&lc.m[span], &dp);
            }
        }

        // Messages: m_r += h_s ⊙ filter_e φ_e.
        let mut dh = vec![0.0; n * f];
        let mut dw = vec![0.0; n_slots * f];
        for &(e, r, s) in &cache.edges {
            let phi = cache.envelope[e].0;
            for c in 0..f {
                let dmc = dm[r * f + c];
                dh[s * f + c] += dmc * lc.filter_out[e * f + c] * phi;
                dw[e * f + c] += dmc * lc.h[s * f + c];
            }
        }

        // Filter network per slot.
        for e in 0..n_slots {
            let span = e * f..(e + 1) * f;
            let dwe = &dw[span.clone()];
            if dwe.iter().all(|&v| v == 0.0) {
                continue;
            }
            let (phi, dphi) = cache.envelope[e];
            let mut dphi_total = 0.0;
            for (c, dac) in span.clone().zip(da.iter_mut()) {
                dphi_total += dw[c] * lc.filter_out[c];
                *dac = dw[c] * phi;
            }
            d_dist_local[e] += dphi_total * dphi;
            // da currently holds d(filter_out).
            ds.fill(0.0);
            lp.filter2.backprop_input(&da, &mut ds);
            if let Some(gr) = grads.as_mut() {
                gr.layers[l].filter2.accumulate(&lc.filter_act[span.clone()], &da);
            }
            for (c, dsc) in span.clone().zip(ds.iter_mut()) {
                *dsc *= act.eval(lc.filter_pre[c]).1;
            }
            lp.filter1
                .backprop_input(&ds, &mut d_rbf[e * k_rbf..(e + 1) * k_rbf]);
            if let Some(gr) = grads.as_mut() {
                gr.layers[l]
                    .filter1
                    .accumulate(&cache.rbf[e * k_rbf..(e + 1) * k_rbf], &ds);
            }
        }

        // Pre-mix and residual.
        for i in 0..n {
            let span = i * f..(i + 1) * f;
            let dhi = &dh[span.clone()];
            if dhi.iter().all(|&v| v == 0.0) {
                continue;
            }
            lp.premix.backprop_input(dhi, &mut dx[span.clone()]);
            if let Some(gr) = grads.as_mut() {
                gr.layers[l].premix.accumulate(&lc.x_in[span], dhi);
            }
        }
    }

    if let Some(gr) = grads.as_mut() {
        for i in 0..n {
            if g.batch[i] == GHOST {
                continue;
            }
            let z = g.species[i] as usize;
            for c in 0..f {
                gr.embedding[z * f + c] += dx[i * f + c];
            }
        }
    }

    // Radial basis.
    let list = g.list;
    for (e, &slot) in cache.slots.iter().enumerate() {
        let d = list.distances()[slot];
        let t = (config.cutoff_lower - d).exp();
        for b in 0..k_rbf {
            let drb = d_rbf[e * k_rbf + b];
            if drb == 0.0 {
                continue;
            }
            let fv = cache.rbf[e * k_rbf + b];
            let beta = params.rbf_betas[b];
            let diff = t - params.rbf_means[b];
            d_dist_local[e] += drb * 2.0 * beta * fv * diff * t;
            if config.trainable_rbf {
                if let Some(gr) = grads.as_mut() {
                    gr.rbf_means[b] += drb * 2.0 * beta * fv * diff;
                    gr.rbf_betas[b] -= drb * fv * diff * diff;
                }
            }
        }
    }

    let mut d_dist = vec![0.0; list.capacity()];
    for (e, &slot) in cache.slots.iter().enumerate() {
        d_dist[slot] = d_dist_local[e];
    }
    Ok((d_dist, grads))
}

/// Energies (per sample and per atom) and the activation cache.
pub fn forward(
    params: &GNParams,
    config: &GNConfig,
    system: &System,
    list: &NeighborList,
) -> Result<(EnergyForces, ForwardCache)> {
    forward_impl(params, config, &Graph::from_system(system, list)?)
}

/// Forces `-∇E` from a cached forward pass.
pub fn backward_forces(
    params: &GNParams,
    config: &GNConfig,
    system: &System,
    list: &NeighborList,
    cache: &ForwardCache,
) -> Result<Vec<Vec3>> {
    let g = Graph::from_system(system, list)?;
    forces_from_graph(params, config, &g, cache)
}

fn forces_from_graph(
    params: &GNParams,
    config: &GNConfig,
    g: &Graph,
    cache: &ForwardCache,
) -> Result<Vec<Vec3>> {
    let ones = vec![1.0; g.n_samples];
    let (d_dist, _) = backward_impl(params, config, g, cache, &ones, false)?;
    let mut forces = distance_pullback(g.list, &d_dist)?;
    for v in forces.iter_mut().flatten() {
        *v = -*v;
    }
    Ok(forces)
}

/// Gradients of `Σ_s upstream[s] · E_s` with respect to every parameter.
/// RBF gradients are zero unless `trainable_rbf` is set.
pub fn backward_params(
    params: &GNParams,
    config: &GNConfig,
    system: &System,
    list: &NeighborList,
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<GNParams> {
    let g = Graph::from_system(system, list)?;
    let (_, grads) = backward_impl(params, config, &g, cache, upstream, true)?;
    Ok(grads.expect("parameter gradients requested"))
}

/// Energies, per-atom energies and (optionally) forces in one call.
pub fn energy_and_forces(
    params: &GNParams,
    config: &GNConfig,
    system: &System,
    list: &NeighborList,
    derivative: bool,
) -> Result<EnergyForces> {
    let (mut out, cache) = forward(params, config, system, list)?;
    if derivative {
        out.forces = Some(backward_forces(params, config, system, list, &cache)?);
    }
    Ok(out)
}

/// Extends the input with a ghost atom so that every neighbor slot holds an
/// edge: unused slots become ghost-ghost pairs at distance `cutoff_upper`,
/// where the envelope is exactly zero.
pub fn pad_static(system: &System, list: &NeighborList, config: &GNConfig) -> Result<PaddedInput> {
    if !config.static_shapes {
        return Err(Error::InvalidConfig(
            "static-shape padding requires static_shapes = true".into(),
        ));
    }
    check_cutoffs(config, list)?;
    if list.n_atoms() != system.len() {
        return Err(Error::LengthMismatch {
            what: "neighbor list atoms",
            expected: system.len(),
            found: list.n_atoms(),
        });
    }
    let ghost = system.len();
    let mut neighbors = list.clone();
    for k in neighbors.count..neighbors.capacity() {
        neighbors.pairs[k] = [ghost as i32; 2];
        neighbors.deltas[k] = [config.cutoff_upper, 0.0, 0.0];
        neighbors.distances[k] = config.cutoff_upper;
    }
    neighbors.count = neighbors.capacity();
    neighbors.n_atoms = ghost + 1;
    let mut species = system.species().to_vec();
    species.push(0);
    let mut batch = system.batch().to_vec();
    batch.push(GHOST);
    Ok(PaddedInput {
        species,
        batch,
        n_samples: system.n_samples(),
        neighbors,
        ghost,
    })
}

/// Energy and forces of a padded input. Forces include a trailing row for
/// the ghost atom.
pub fn energy_and_forces_padded(
    params: &GNParams,
    config: &GNConfig,
    padded: &PaddedInput,
    derivative: bool,
) -> Result<EnergyForces> {
    let g = Graph::from_padded(padded);
    let (mut out, cache) = forward_impl(params, config, &g)?;
    if derivative {
        out.forces = Some(forces_from_graph(params, config, &g, &cache)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
