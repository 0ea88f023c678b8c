//! Straight-line re-implementations used as oracles. They read the flat
//! parameter vector by the documented layout and share no code with the
//! production network beyond the type definitions.

use crate::approximator::{Network, NetworkSpec};
use crate::env::Observation;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Q-values computed with plain index loops.
pub fn naive_q(spec: &NetworkSpec, p: &[f64], obs: &Observation) -> Vec<f64> {
    let i_w = spec.input_width;
    let u = spec.recurrent_units;
    let cols = i_w + u;
    let b_off = 4 * u * cols;
    let mut off = b_off + 4 * u;

    let mut h = vec![0.0; u];
    let mut c = vec![0.0; u];
    for t in 0..obs.history() {
        let x = obs.frame(t);
        let mut z = vec![0.0; 4 * u];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut s = p[b_off + r];
            for k in 0..i_w {
                s += p[r * cols + k] * x[k];
            }
            for k in 0..u {
                s += p[r * cols + i_w + k] * h[k];
            }
            *zr = s;
        }
        for k in 0..u {
            let ig = sig(z[k]);
            let fg = sig(z[u + k]);
            let gg = z[2 * u + k].tanh();
            let og = sig(z[3 * u + k]);
            c[k] = fg * c[k] + ig * gg;
            h[k] = og * c[k].tanh();
        }
    }

    let mut a = h;
    for &width in &spec.dense_widths {
        let n_in = a.len();
        let mut next = vec![0.0; width];
        for (o, v) in next.iter_mut().enumerate() {
            let mut s = p[off + width * n_in + o];
            for k in 0..n_in {
                s += p[off + o * n_in + k] * a[k];
            }
            *v = if s > 0.0 { s } else { 0.0 };
        }
        off += width * n_in + width;
        a = next;
    }

    let last = a.len();
    let mut v = p[off + last];
    for k in 0..last {
        v += p[off + k] * a[k];
    }
    off += last + 1;
    let n_a = spec.num_actions;
    let mut adv = vec![0.0; n_a];
    for (j, av) in adv.iter_mut().enumerate() {
        let mut s = p[off + n_a * last + j];
        for k in 0..last {
            s += p[off + j * last + k] * a[k];
        }
        *av = s;
    }
    let mut mean = 0.0;
    for x in &adv {
        mean += x;
    }
    mean /= n_a as f64;
    adv.iter().map(|x| v + (x - mean)).collect()
}

/// Double-Q target for one transition with explicit loops.
pub fn naive_target(
    reward: f64,
    gamma: f64,
    next: &[Observation],
    online: &[Network],
    target: &[Network],
) -> f64 {
    let mut total = 0.0;
    for i in 0..online.len() {
        let q_on = naive_q(online[i].spec(), online[i].params().as_slice(), &next[i]);
        let mut best = 0;
        for a in 1..q_on.len() {
            if q_on[a] > q_on[best] {
                best = a;
            }
        }
        let q_tg = naive_q(target[i].spec(), target[i].params().as_slice(), &next[i]);
        total += q_tg[best];
    }
    reward + gamma * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    #[test]
    fn naive_forward_agrees_with_network() {
        let spec = NetworkSpec {
            input_width: 4,
            recurrent_units: 5,
            dense_widths: vec![6, 3],
            num_actions: 4,
        };
        let mut rng = substream(11, Stream::Evaluation, 0);
        for k in 0..20 {
            let mut net = Network::init(spec.clone(), &mut substream(11, Stream::Init, k)).unwrap();
            for p in net.params_mut().as_mut_slice() {
                *p += rng.gen_range(-0.05..0.05);
            }
            let obs = Observation::new(4, (0..12).map(|_| rng.gen()).collect()).unwrap();
            let fast = net.forward(&obs).unwrap();
            let slow = naive_q(&spec, net.params().as_slice(), &obs);
            for (a, b) in fast.iter().zip(&slow) {
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                    "{fast:?} vs {slow:?}"
                );
            }
        }
    }
}
