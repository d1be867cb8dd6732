use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::{ElasticSource, Simulation};
use crate::ensemble::{Dim, ParticleEnsemble};
use crate::scattering::sample_cos_polar_3d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    /// In-plane rotation of the relative velocity by `angle`.
    Elastic2d { angle: f64 },
    /// Polar deflection from the incoming relative velocity and azimuth.
    Elastic3d { cos_theta: f64, azimuth: f64 },
    Reactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionEvent {
    pub id_a: u32,
    pub id_b: u32,
    /// Relative kinetic energy `m g²/4`, J.
    pub e_rel: f64,
    pub outcome: Outcome,
}

/// Apply `outcome` to the pair `(i, j)`. Elastic outcomes keep the centre of
/// mass velocity and `|g|`; reactive outcomes remove both particles.
pub fn apply_collision(ens: &mut ParticleEnsemble, i: usize, j: usize, outcome: Outcome) {
    let (vi, vj) = (ens.vel[i], ens.vel[j]);
    let mut cm = [0.0; 3];
    let mut g = [0.0; 3];
    for k in 0..3 {
        cm[k] = 0.5 * (vi[k] + vj[k]);
        g[k] = vi[k] - vj[k];
    }
    let g_new = match outcome {
        Outcome::Reactive => {
            ens.alive[i] = false;
            ens.alive[j] = false;
            ens.n_reactive_pairs += 1;
            return;
        }
        Outcome::Elastic2d { angle } => {
            let (s, c) = angle.sin_cos();
            [c * g[0] - s * g[1], s * g[0] + c * g[1], 0.0]
        }
        Outcome::Elastic3d { cos_theta, azimuth } => {
            let gm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if gm == 0.0 {
                return;
            }
            let e = [g[0] / gm, g[1] / gm, g[2] / gm];
            // any unit vector orthogonal to e
            let a = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let dot = a[0] * e[0] + a[1] * e[1] + a[2] * e[2];
            let mut p = [a[0] - dot * e[0], a[1] - dot * e[1], a[2] - dot * e[2]];
            let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            for x in p.iter_mut() {
                *x /= pn;
            }
            let q = [
                e[1] * p[2] - e[2] * p[1],
                e[2] * p[0] - e[0] * p[2],
                e[0] * p[1] - e[1] * p[0],
            ];
            let st = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
            let (sa, ca) = azimuth.sin_cos();
            let mut out = [0.0; 3];
            for k in 0..3 {
                out[k] = gm * (cos_theta * e[k] + st * (ca * p[k] + sa * q[k]));
            }
            out
        }
    };
    for k in 0..3 {
        ens.vel[i][k] = cm[k] + 0.5 * g_new[k];
        ens.vel[j][k] = cm[k] - 0.5 * g_new[k];
    }
}

fn rel(ens: &ParticleEnsemble, i: usize, j: usize) -> ([f64; 3], f64) {
    let mut g = [0.0; 3];
    for k in 0..3 {
        g[k] = ens.vel[i][k] - ens.vel[j][k];
    }
    (g, g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
}

impl Simulation {
    /// Draw the outcome for a pair that is known to collide.
    fn draw_outcome(&mut self, e_rel: f64, el: f64, re: f64) -> Outcome {
        let tot = el + re;
        if tot <= 0.0 || self.rng.random::<f64>() * tot < re {
            return Outcome::Reactive;
        }
        match self.kernel.dim {
            Dim::Two => {
                let u = self.rng.random::<f64>();
                Outcome::Elastic2d {
                    angle: self.kernel.sampler_at(e_rel).sample(u),
                }
            }
            Dim::Three => {
                let (u1, u2, u3) = (self.rng.random::<f64>(), self.rng.random::<f64>(), self.rng.random::<f64>());
                Outcome::Elastic3d {
                    cos_theta: sample_cos_polar_3d(self.kernel.alpha_3d, u1, u2),
                    azimuth: 2.0 * PI * u3,
                }
            }
        }
    }

    fn execute(&mut self, i: usize, j: usize, e_rel: f64, outcome: Outcome) {
        apply_collision(&mut self.ens, i, j, outcome);
        match outcome {
            Outcome::Reactive => self.counters.reactive_pairs += 1,
            _ => self.counters.elastic += 1,
        }
        if self.record_events {
            self.events.push(CollisionEvent {
                id_a: self.ens.id[i],
                id_b: self.ens.id[j],
                e_rel,
                outcome,
            });
        }
    }

    /// Upper estimate of `size·g` from random pairs, with a safety margin.
    pub(super) fn estimate_sg_max(&mut self) -> f64 {
        let live: Vec<usize> = (0..self.ens.pos.len()).filter(|&i| self.ens.alive[i]).collect();
        if live.len() < 2 {
            return 0.0;
        }
        let mut best = 0.0f64;
        let m = self.ens.mass;
        for _ in 0..2000 {
            let a = live[self.rng.random_range(0..live.len())];
            let b = live[self.rng.random_range(0..live.len())];
            if a == b {
                continue;
            }
            let (_, g2) = rel(&self.ens, a, b);
            let (el, re) = self.kernel.sizes(0.25 * m * g2);
            best = best.max((el + re) * g2.sqrt());
        }
        2.0 * best
    }

    /// No-time-counter pair sampling on a grid of cells. Returns the number
    /// of collision events.
    pub(super) fn collide_cells(&mut self, cell_frac: f64, dt: f64) -> u64 {
        if matches!(self.kernel.elastic, ElasticSource::None) && matches!(self.kernel.reactive, super::ReactiveSource::None)
        {
            return 0;
        }
        let d = self.ens.dim.n();
        let live: Vec<usize> = (0..self.ens.pos.len()).filter(|&i| self.ens.alive[i]).collect();
        let n = live.len();
        if n < 2 {
            return 0;
        }
        // per-axis cloud width sets the cell size
        let mut mean = [0.0; 3];
        let mut var = [0.0; 3];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &live {
            for k in 0..d {
                let x = self.ens.pos[i][k];
                mean[k] += x;
                var[k] += x * x;
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        let mut h = [1.0; 3];
        for k in 0..d {
            mean[k] /= n as f64;
            let sd = (var[k] / n as f64 - mean[k] * mean[k]).max(0.0).sqrt();
            h[k] = if sd > 0.0 { cell_frac * sd } else { 1.0 };
        }
        let mut dims = [1usize; 3];
        loop {
            let mut total = 1usize;
            for k in 0..d {
                dims[k] = ((hi[k] - lo[k]) / h[k]).floor() as usize + 1;
                total = total.saturating_mul(dims[k]);
            }
            if total <= 4 * n + 1024 {
                break;
            }
            let grow = (total as f64 / (4 * n) as f64).powf(1.0 / d as f64) * 1.01;
            for hk in h.iter_mut().take(d) {
                *hk *= grow;
            }
        }
        let vol: f64 = h[..d].iter().product();
        let total: usize = dims[..d].iter().product();
        let cell_of = |x: &[f64; 3]| {
            let mut idx = 0usize;
            for k in (0..d).rev() {
                let c = (((x[k] - lo[k]) / h[k]) as usize).min(dims[k] - 1);
                idx = idx * dims[k] + c;
            }
            idx
        };
        // counting sort of live particles by cell
        let mut start = vec![0usize; total + 1];
        let cells: Vec<usize> = live.iter().map(|&i| cell_of(&self.ens.pos[i])).collect();
        for &c in &cells {
            start[c + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; n];
        for (k, &c) in cells.iter().enumerate() {
            order[fill[c]] = live[k];
            fill[c] += 1;
        }

        let m = self.ens.mass;
        let mut events = 0u64;
        let mut members: Vec<usize> = Vec::new();
        for c in 0..total {
            let count = start[c + 1] - start[c];
            if count < 2 {
                continue;
            }
            members.clear();
            members.extend_from_slice(&order[start[c]..start[c + 1]]);
            let pairs = 0.5 * (count * (count - 1)) as f64;
            let expected = pairs * self.sg_max * dt / vol;
            let mut n_cand = expected.floor() as u64;
            if self.rng.random::<f64>() < expected - expected.floor() {
                n_cand += 1;
            }
            for _ in 0..n_cand {
                let len = members.len();
                if len < 2 {
                    break;
                }
                let a = self.rng.random_range(0..len);
                let mut b = self.rng.random_range(0..len - 1);
                if b >= a {
                    b += 1;
                }
                let (i, j) = (members[a], members[b]);
                let (_, g2) = rel(&self.ens, i, j);
                let e_rel = 0.25 * m * g2;
                let (el, re) = self.kernel.sizes(e_rel);
                let sg = (el + re) * g2.sqrt();
                let bound = self.sg_max;
                if sg > self.sg_max {
                    self.sg_max = sg;
                }
                if self.rng.random::<f64>() * bound >= sg {
                    continue;
                }
                let outcome = self.draw_outcome(e_rel, el, re);
                self.execute(i, j, e_rel, outcome);
                events += 1;
                if outcome == Outcome::Reactive {
                    let (x, y) = if a > b { (a, b) } else { (b, a) };
                    members.swap_remove(x);
                    members.swap_remove(y);
                }
            }
        }
        events
    }

    /// Distance-threshold detection on a hashed grid. Each particle collides
    /// at most once per step with the lowest-index eligible partner.
    pub(super) fn collide_distance(&mut self, dt: f64) -> u64 {
        let d = self.ens.dim.n();
        let m = self.ens.mass;
        let live: Vec<usize> = (0..self.ens.pos.len()).filter(|&i| self.ens.alive[i]).collect();
        if live.len() < 2 {
            return 0;
        }
        let vmax = live
            .iter()
            .map(|&i| self.ens.vel[i].iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let g_max = 2.0 * vmax;
        let e_max = 0.25 * m * g_max * g_max;
        let kdim = self.kernel.dim;
        let diameter = move |sizes: (f64, f64)| match kdim {
            Dim::Two => 0.5 * (sizes.0 + sizes.1),
            Dim::Three => ((sizes.0 + sizes.1) / PI).sqrt(),
        };
        let mut d_max = 0.0f64;
        for k in 0..=64 {
            let e = e_max * 10f64.powf(-6.0 * (1.0 - k as f64 / 64.0));
            d_max = d_max.max(diameter(self.kernel.sizes(e)));
        }
        let reach = d_max + g_max * dt;
        if reach <= 0.0 {
            return 0;
        }
        let key = |x: &[f64; 3]| -> [i64; 3] {
            let mut c = [0i64; 3];
            for k in 0..d {
                c[k] = (x[k] / reach).floor() as i64;
            }
            c
        };
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for &i in &live {
            grid.entry(key(&self.ens.pos[i])).or_default().push(i);
        }
        let mut busy = vec![false; self.ens.pos.len()];
        let offsets: Vec<[i64; 3]> = {
            let r: Vec<i64> = vec![-1, 0, 1];
            let mut v = Vec::new();
            for &a in &r {
                for &b in &r {
                    if d == 2 {
                        v.push([a, b, 0]);
                    } else {
                        for &c in &r {
                            v.push([a, b, c]);
                        }
                    }
                }
            }
            v
        };
        let mut events = 0u64;
        for &i in &live {
            if busy[i] || !self.ens.alive[i] {
                continue;
            }
            let ci = key(&self.ens.pos[i]);
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for off in &offsets {
                let cell = [ci[0] + off[0], ci[1] + off[1], ci[2] + off[2]];
                let Some(list) = grid.get(&cell) else { continue };
                for &j in list {
                    if j <= i || busy[j] || !self.ens.alive[j] {
                        continue;
                    }
                    if best.is_some_and(|b| b.0 < j) {
                        continue;
                    }
                    let (g, g2) = rel(&self.ens, i, j);
                    if g2 == 0.0 {
                        continue;
                    }
                    let mut r = [0.0; 3];
                    for k in 0..d {
                        r[k] = self.ens.pos[i][k] - self.ens.pos[j][k];
                    }
                    // relative position at the start of the step
                    let r0: Vec<f64> = (0..3).map(|k| r[k] - g[k] * dt).collect();
                    let approach: f64 = (0..3).map(|k| r0[k] * g[k]).sum();
                    if approach >= 0.0 {
                        continue;
                    }
                    let s = (-approach / (g2 * dt)).clamp(0.0, 1.0);
                    let dmin2: f64 = (0..3).map(|k| (r0[k] + s * g[k] * dt).powi(2)).sum();
                    let e_rel = 0.25 * m * g2;
                    let (el, re) = self.kernel.sizes(e_rel);
                    let dd = diameter((el, re));
                    // A pair that starts the step already inside the threshold
                    // has just scattered; it must separate before meeting again.
                    let r02: f64 = r0.iter().map(|x| x * x).sum();
                    if dmin2 < dd * dd && r02 >= dd * dd {
                        best = Some((j, e_rel, el, re));
                    }
                }
            }
            if let Some((j, e_rel, el, re)) = best {
                let outcome = self.draw_outcome(e_rel, el, re);
                self.execute(i, j, e_rel, outcome);
                busy[i] = true;
                busy[j] = true;
                events += 1;
            }
        }
        events
    }
}
