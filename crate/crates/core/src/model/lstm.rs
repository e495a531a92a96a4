//! Multi-layer bidirectional LSTM over a flat parameter vector.
//!
//! Flattened layout, layer-major, forward direction before backward. Each
//! direction block holds `W` (`4H × In`), `U` (`4H × H`) and `b` (`4H`), all
//! row-major, with gate rows ordered input, forget, cell, output. Layer 0
//! reads the feature vectors; deeper layers read the `2H` concatenation of
//! the previous layer's forward and backward states.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmLayout {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

/// Location of one gate's parameters inside a direction block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

impl LstmLayout {
    pub fn new(input_dim: usize, hidden: usize, layers: usize) -> Self {
        LstmLayout {
            input_dim,
            hidden,
            layers,
        }
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            2 * self.hidden
        }
    }

    /// Length of one direction block of `layer`.
    pub fn block_len(&self, layer: usize) -> usize {
        let h = self.hidden;
        4 * h * (self.layer_input(layer) + h + 1)
    }

    /// Offset of the block for `layer`, direction 0 (forward) or 1 (backward).
    pub fn block_offset(&self, layer: usize, direction: usize) -> usize {
        let before: usize = (0..layer).map(|l| 2 * self.block_len(l)).sum();
        before + direction * self.block_len(layer)
    }

    /// Exact flattened parameter count of the whole stack.
    pub fn param_len(&self) -> usize {
        (0..self.layers).map(|l| 2 * self.block_len(l)).sum()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Flat indices of one gate's bias entries.
    pub fn bias_range(&self, layer: usize, direction: usize, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden;
        let start = self.block_offset(layer, direction) + 4 * h * (self.layer_input(layer) + h) + gate as usize * h;
        start..start + h
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Views into one direction block.
struct Block<'a> {
    w: &'a [f64],
    u: &'a [f64],
    b: &'a [f64],
}

fn split_block(block: &[f64], input: usize, hidden: usize) -> Block<'_> {
    let (w, rest) = block.split_at(4 * hidden * input);
    let (u, b) = rest.split_at(4 * hidden * hidden);
    Block { w, u, b }
}

/// Activations of one direction, stored by sentence position.
#[derive(Debug, Clone)]
struct DirectionCache {
    /// Post-activation gates `i, f, g, o` (`n × 4H`).
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f64>,
    forward: DirectionCache,
    backward: DirectionCache,
}

/// Everything the backward pass needs from a forward run.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    len: usize,
    layers: Vec<LayerCache>,
}

/// Positions in processing order and the predecessor of each.
fn order(n: usize, reverse: bool) -> impl Iterator<Item = (usize, Option<usize>)> {
    (0..n).map(move |s| {
        if reverse {
            let t = n - 1 - s;
            (t, (t + 1 < n).then_some(t + 1))
        } else {
            (s, s.checked_sub(1))
        }
    })
}

fn run_direction(block: &[f64], input: &[f64], n: usize, in_dim: usize, h: usize, reverse: bool) -> DirectionCache {
    let p = split_block(block, in_dim, h);
    let mut cache = DirectionCache {
        gates: vec![0.0; n * 4 * h],
        cells: vec![0.0; n * h],
        tanh_cells: vec![0.0; n * h],
        hidden: vec![0.0; n * h],
    };
    let mut z = vec![0.0; 4 * h];
    for (t, prev) in order(n, reverse) {
        let x = &input[t * in_dim..(t + 1) * in_dim];
        z.copy_from_slice(p.b);
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &p.w[r * in_dim..(r + 1) * in_dim];
            *zr += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        if let Some(prev) = prev {
            let h_prev = &cache.hidden[prev * h..(prev + 1) * h];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &p.u[r * h..(r + 1) * h];
                *zr += row.iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        for j in 0..h {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[h + j]);
            let g_g = z[2 * h + j].tanh();
            let o_g = sigmoid(z[3 * h + j]);
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * h + j]);
            let c = f_g * c_prev + i_g * g_g;
            let tc = c.tanh();
            let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
            gates[j] = i_g;
            gates[h + j] = f_g;
            gates[2 * h + j] = g_g;
            gates[3 * h + j] = o_g;
            cache.cells[t * h + j] = c;
            cache.tanh_cells[t * h + j] = tc;
            cache.hidden[t * h + j] = o_g * tc;
        }
    }
    cache
}

/// Backpropagation through time for one direction.
#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    block: &[f64],
    d_block: &mut [f64],
    input: &[f64],
    cache: &DirectionCache,
    d_hidden: &[f64],
    d_input: &mut [f64],
    n: usize,
    in_dim: usize,
    h: usize,
    reverse: bool,
) {
    let p = split_block(block, in_dim, h);
    let (dw, rest) = d_block.split_at_mut(4 * h * in_dim);
    let (du, db) = rest.split_at_mut(4 * h * h);

    let steps: Vec<(usize, Option<usize>)> = order(n, reverse).collect();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for &(t, prev) in steps.iter().rev() {
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let (i_g, f_g, g_g, o_g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = cache.tanh_cells[t * h + j];
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * h + j]);
            let dh = d_hidden[t * h + j] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
            let d_i = dc * g_g;
            let d_g = dc * i_g;
            let d_f = dc * c_prev;
            dc_next[j] = dc * f_g;
            dz[j] = d_i * i_g * (1.0 - i_g);
            dz[h + j] = d_f * f_g * (1.0 - f_g);
            dz[2 * h + j] = d_g * (1.0 - g_g * g_g);
            dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
        }

        let x = &input[t * in_dim..(t + 1) * in_dim];
        let dx = &mut d_input[t * in_dim..(t + 1) * in_dim];
        for (r, &g) in dz.iter().enumerate() {
            db[r] += g;
            if g == 0.0 {
                continue;
            }
            let w_row = &p.w[r * in_dim..(r + 1) * in_dim];
            let dw_row = &mut dw[r * in_dim..(r + 1) * in_dim];
            for c in 0..in_dim {
                dw_row[c] += g * x[c];
                dx[c] += g * w_row[c];
            }
        }

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if let Some(prev) = prev {
            let h_prev = &cache.hidden[prev * h..(prev + 1) * h];
            for (r, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let u_row = &p.u[r * h..(r + 1) * h];
                let du_row = &mut du[r * h..(r + 1) * h];
                for c in 0..h {
                    du_row[c] += g * h_prev[c];
                    dh_next[c] += g * u_row[c];
                }
            }
        }
    }
}

/// Runs the stack over `n` input vectors (`n × input_dim`), returning the
/// top layer's `n × 2H` states and the cache for [`backward`].
pub fn forward(params: &[f64], layout: &LstmLayout, input: &[f64], n: usize) -> (Vec<f64>, EncoderCache) {
    assert_eq!(params.len(), layout.param_len(), "parameter vector length");
    assert_eq!(input.len(), n * layout.input_dim, "input length");
    let h = layout.hidden;
    let mut layers = Vec::with_capacity(layout.layers);
    let mut current = input.to_vec();
    for l in 0..layout.layers {
        let in_dim = layout.layer_input(l);
        let fwd_block = &params[layout.block_offset(l, 0)..][..layout.block_len(l)];
        let bwd_block = &params[layout.block_offset(l, 1)..][..layout.block_len(l)];
        let fwd = run_direction(fwd_block, &current, n, in_dim, h, false);
        let bwd = run_direction(bwd_block, &current, n, in_dim, h, true);
        let mut out = vec![0.0; n * 2 * h];
        for t in 0..n {
            out[t * 2 * h..t * 2 * h + h].copy_from_slice(&fwd.hidden[t * h..(t + 1) * h]);
            out[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&bwd.hidden[t * h..(t + 1) * h]);
        }
        layers.push(LayerCache {
            input: std::mem::replace(&mut current, out),
            forward: fwd,
            backward: bwd,
        });
    }
    (current, EncoderCache { len: n, layers })
}

/// Adds the parameter gradient to `d_params` and returns the input gradient.
pub fn backward(
    params: &[f64],
    layout: &LstmLayout,
    cache: &EncoderCache,
    d_output: &[f64],
    d_params: &mut [f64],
) -> Vec<f64> {
    let n = cache.len;
    let h = layout.hidden;
    assert_eq!(d_output.len(), n * 2 * h);
    assert_eq!(d_params.len(), params.len());

    let mut d_out = d_output.to_vec();
    for l in (0..layout.layers).rev() {
        let in_dim = layout.layer_input(l);
        let layer = &cache.layers[l];
        let mut d_fwd = vec![0.0; n * h];
        let mut d_bwd = vec![0.0; n * h];
        for t in 0..n {
            d_fwd[t * h..(t + 1) * h].copy_from_slice(&d_out[t * 2 * h..t * 2 * h + h]);
            d_bwd[t * h..(t + 1) * h].copy_from_slice(&d_out[t * 2 * h + h..(t + 1) * 2 * h]);
        }
        let mut d_in = vec![0.0; n * in_dim];
        for (direction, (dir_cache, d_h)) in [(&layer.forward, &d_fwd), (&layer.backward, &d_bwd)]
            .into_iter()
            .enumerate()
        {
            let offset = layout.block_offset(l, direction);
            let len = layout.block_len(l);
            backprop_direction(
                &params[offset..offset + len],
                &mut d_params[offset..offset + len],
                &layer.input,
                dir_cache,
                d_h,
                &mut d_in,
                n,
                in_dim,
                h,
                direction == 1,
            );
        }
        d_out = d_in;
    }
    d_out
}
