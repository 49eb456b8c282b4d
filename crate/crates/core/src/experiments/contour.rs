use serde::Serialize;

/// Straight piece of a level set, in axis coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// Marching squares on a row-major grid `values[i * ys.len() + j]` at `(xs[i], ys[j])`.
///
/// Edge crossings are linearly interpolated. Saddle cells are resolved by the
/// cell-centre average. Cells touching a NaN are skipped.
pub fn contour_segments(xs: &[f64], ys: &[f64], values: &[f64], level: f64) -> Vec<Segment> {
    let ny = ys.len();
    let v = |i: usize, j: usize| values[i * ny + j];
    let mut out = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            // Corners counter-clockwise from (i, j).
            let corners = [
                (xs[i], ys[j], v(i, j)),
                (xs[i + 1], ys[j], v(i + 1, j)),
                (xs[i + 1], ys[j + 1], v(i + 1, j + 1)),
                (xs[i], ys[j + 1], v(i, j + 1)),
            ];
            if corners.iter().any(|c| c.2.is_nan()) {
                continue;
            }
            let mut case = 0;
            for (k, c) in corners.iter().enumerate() {
                if c.2 > level {
                    case |= 1 << k;
                }
            }
            let edge = |k: usize| {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                let t = (level - a.2) / (b.2 - a.2);
                (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
            };
            let mut push = |e0: usize, e1: usize| {
                let (p, q) = (edge(e0), edge(e1));
                out.push(Segment { x0: p.0, y0: p.1, x1: q.0, y1: q.1 });
            };
            // Edge k joins corner k to corner k + 1.
            match case {
                0 | 15 => {}
                1 | 14 => push(3, 0),
                2 | 13 => push(0, 1),
                3 | 12 => push(3, 1),
                4 | 11 => push(1, 2),
                6 | 9 => push(0, 2),
                7 | 8 => push(2, 3),
                5 | 10 => {
                    let centre = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                    let joined = (centre > level) == (case == 5);
                    if joined {
                        push(0, 1);
                        push(2, 3);
                    } else {
                        push(3, 0);
                        push(1, 2);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    out
}
