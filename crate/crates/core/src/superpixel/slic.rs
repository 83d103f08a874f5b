use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::lab::LabImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlicParams {
    /// Requested number of superpixels.
    pub k: usize,
    /// Compactness weight `m`.
    pub compactness: f64,
    pub iterations: usize,
    /// Fragments smaller than `min_fraction · S²` are merged into a neighbour.
    pub min_fraction: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            k: 100,
            compactness: 10.0,
            iterations: 10,
            min_fraction: 0.25,
        }
    }
}

impl SlicParams {
    pub fn new(k: usize, compactness: f64) -> Self {
        Self {
            k,
            compactness,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("superpixel count must be at least 1".into()));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::Config(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("SLIC needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Cluster centre in lab-xy space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Center {
    pub lab: [f64; 3],
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpixelMap {
    pub width: usize,
    pub height: usize,
    /// Label of each pixel, row-major, in `0..count`.
    pub labels: Vec<usize>,
    pub centers: Vec<Center>,
    /// Grid interval `S`.
    pub interval: f64,
    /// Mean distance from each pixel to its assigned centre, one entry per k-means iteration.
    pub residuals: Vec<f64>,
    /// Mean squared distance, same schedule. This is the quantity the centre
    /// update minimises, so unlike the plain mean it never increases.
    pub residuals_sq: Vec<f64>,
}

impl SuperpixelMap {
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of each label.
    pub fn bounding_boxes(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut b = vec![(usize::MAX, usize::MAX, 0, 0); self.count()];
        for y in 0..self.height {
            for x in 0..self.width {
                let e = &mut b[self.label(x, y)];
                e.0 = e.0.min(x);
                e.1 = e.1.min(y);
                e.2 = e.2.max(x);
                e.3 = e.3.max(y);
            }
        }
        b
    }

    /// True when a 4-neighbour carries a different label.
    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        let l = self.label(x, y);
        (x > 0 && self.label(x - 1, y) != l)
            || (x + 1 < self.width && self.label(x + 1, y) != l)
            || (y > 0 && self.label(x, y - 1) != l)
            || (y + 1 < self.height && self.label(x, y + 1) != l)
    }
}

/// Per-axis seed counts: `round(extent / S)`, at least 1, reduced along the
/// longer axis until no more than `k` seeds remain.
fn grid_counts(w: usize, h: usize, s: f64, k: usize) -> (usize, usize) {
    let mut nx = ((w as f64 / s).round() as usize).clamp(1, w);
    let mut ny = ((h as f64 / s).round() as usize).clamp(1, h);
    while nx * ny > k {
        if nx >= ny && nx > 1 {
            nx -= 1;
        } else {
            ny -= 1;
        }
    }
    (nx, ny)
}

fn gradient(img: &LabImage, x: usize, y: usize) -> f64 {
    let (w, h) = (img.width, img.height);
    let d = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let gx = d(img.at((x + 1).min(w - 1), y), img.at(x.saturating_sub(1), y));
    let gy = d(img.at(x, (y + 1).min(h - 1)), img.at(x, y.saturating_sub(1)));
    gx + gy
}

struct Metric {
    /// `(m / S)²`.
    xy_weight: f64,
}

impl Metric {
    fn d2(&self, c: &Center, lab: [f64; 3], x: usize, y: usize) -> f64 {
        let dl = (0..3).map(|i| (c.lab[i] - lab[i]).powi(2)).sum::<f64>();
        let dxy = (c.x - x as f64).powi(2) + (c.y - y as f64).powi(2);
        dl + dxy * self.xy_weight
    }
}

/// Simple linear iterative clustering with connectivity enforcement.
///
/// Seeds sit on a regular grid of interval `S = sqrt(N / K)` and move to the
/// lowest-gradient pixel of their 3×3 neighbourhood. Each iteration assigns
/// every pixel to the nearest centre by `D = sqrt(d_lab² + (d_xy / S)² m²)`
/// among the centres whose `±max(S, step)` window covers it and its current
/// centre, then moves each centre to the mean of its members.
pub fn slic(img: &LabImage, p: &SlicParams) -> Result<SuperpixelMap> {
    p.validate()?;
    let (w, h) = (img.width, img.height);
    let n = w * h;
    if n == 0 {
        return Err(Error::invalid("slic", "empty image"));
    }
    if p.k > n {
        return Err(Error::invalid(
            "slic",
            format!("{} superpixels requested for {n} pixels", p.k),
        ));
    }
    let s = (n as f64 / p.k as f64).sqrt();
    let (nx, ny) = grid_counts(w, h, s, p.k);
    let (step_x, step_y) = (w as f64 / nx as f64, h as f64 / ny as f64);

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (step_x * (i as f64 + 0.5)).floor() as usize;
            let cy = (step_y * (j as f64 + 0.5)).floor() as usize;
            let (mut bx, mut by, mut best) = (cx, cy, gradient(img, cx, cy));
            for yy in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                for xx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                    let g = gradient(img, xx, yy);
                    if g < best {
                        (bx, by, best) = (xx, yy, g);
                    }
                }
            }
            centers.push(Center {
                lab: img.at(bx, by),
                x: bx as f64,
                y: by as f64,
            });
        }
    }

    // Initial assignment: the grid cell each pixel falls in.
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let gi = ((x as f64 / step_x) as usize).min(nx - 1);
            let gj = ((y as f64 / step_y) as usize).min(ny - 1);
            gj * nx + gi
        })
        .collect();

    let metric = Metric {
        xy_weight: (p.compactness / s).powi(2),
    };
    let rx = s.max(step_x).ceil() as isize;
    let ry = s.max(step_y).ceil() as isize;
    let mut dist = vec![0.0f64; n];
    let mut residuals = Vec::with_capacity(p.iterations);
    let mut residuals_sq = Vec::with_capacity(p.iterations);

    for _ in 0..p.iterations {
        for i in 0..n {
            dist[i] = metric.d2(&centers[labels[i]], img.data[i], i % w, i / w);
        }
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let y0 = (cy - ry).max(0) as usize;
            let y1 = ((cy + ry).min(h as isize - 1)).max(-1);
            let x0 = (cx - rx).max(0) as usize;
            let x1 = ((cx + rx).min(w as isize - 1)).max(-1);
            if y1 < 0 || x1 < 0 {
                continue;
            }
            for y in y0..=y1 as usize {
                for x in x0..=x1 as usize {
                    let i = y * w + x;
                    let d = metric.d2(c, img.data[i], x, y);
                    if d < dist[i] || (d == dist[i] && ci < labels[i]) {
                        dist[i] = d;
                        labels[i] = ci;
                    }
                }
            }
        }
        residuals.push(dist.iter().map(|d| d.sqrt()).sum::<f64>() / n as f64);
        residuals_sq.push(dist.iter().sum::<f64>() / n as f64);
        centers = recompute_centers(img, &labels, &centers);
    }

    let min_size = ((p.min_fraction * s * s) as usize).max(1);
    let labels = enforce_connectivity(w, h, &labels, min_size);
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let seed = vec![
        Center {
            lab: [0.0; 3],
            x: 0.0,
            y: 0.0
        };
        count
    ];
    let centers = recompute_centers(img, &labels, &seed);
    Ok(SuperpixelMap {
        width: w,
        height: h,
        labels,
        centers,
        interval: s,
        residuals,
        residuals_sq,
    })
}

/// Member means; centres without members keep their previous value.
fn recompute_centers(img: &LabImage, labels: &[usize], prev: &[Center]) -> Vec<Center> {
    let mut acc = vec![[0.0f64; 6]; prev.len()];
    for (i, &l) in labels.iter().enumerate() {
        let lab = img.data[i];
        let a = &mut acc[l];
        a[0] += lab[0];
        a[1] += lab[1];
        a[2] += lab[2];
        a[3] += (i % img.width) as f64;
        a[4] += (i / img.width) as f64;
        a[5] += 1.0;
    }
    acc.iter()
        .zip(prev)
        .map(|(a, p)| {
            if a[5] == 0.0 {
                *p
            } else {
                Center {
                    lab: [a[0] / a[5], a[1] / a[5], a[2] / a[5]],
                    x: a[3] / a[5],
                    y: a[4] / a[5],
                }
            }
        })
        .collect()
}

/// Splits labels into 4-connected components, folds every component smaller
/// than `min_size` into the neighbour it shares the longest border with, and
/// numbers the survivors in raster order of their first pixel.
pub fn enforce_connectivity(w: usize, h: usize, labels: &[usize], min_size: usize) -> Vec<usize> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let l = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == l {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }

    let m = sizes.len();
    let mut border: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); m];
    for i in 0..n {
        let (x, y) = (i % w, i / w);
        for j in [(x + 1 < w).then(|| i + 1), (y + 1 < h).then(|| i + w)]
            .into_iter()
            .flatten()
        {
            let (a, b) = (comp[i], comp[j]);
            if a != b {
                *border[a].entry(b).or_default() += 1;
                *border[b].entry(a).or_default() += 1;
            }
        }
    }

    // Union by redirect: `owner[c]` is the surviving component that absorbed `c`.
    let mut owner: Vec<usize> = (0..m).collect();
    let mut live: BTreeSet<(usize, usize)> = (0..m).map(|c| (sizes[c], c)).collect();
    while live.len() > 1 {
        let &(size, c) = live.iter().next().unwrap();
        if size >= min_size {
            break;
        }
        let (&target, _) = border[c]
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("a component in a multi-component image has a neighbour");
        live.remove(&(size, c));
        live.remove(&(sizes[target], target));
        sizes[target] += size;
        live.insert((sizes[target], target));
        owner[c] = target;
        let absorbed = std::mem::take(&mut border[c]);
        for (nb, cnt) in absorbed {
            border[nb].remove(&c);
            if nb != target {
                *border[target].entry(nb).or_default() += cnt;
                *border[nb].entry(target).or_default() += cnt;
            }
        }
        border[target].remove(&c);
    }

    let root = |mut c: usize| {
        while owner[c] != c {
            c = owner[c];
        }
        c
    };
    let mut renumber = vec![usize::MAX; m];
    let mut next = 0;
    comp.iter()
        .map(|&c| {
            let r = root(c);
            if renumber[r] == usize::MAX {
                renumber[r] = next;
                next += 1;
            }
            renumber[r]
        })
        .collect()
}
