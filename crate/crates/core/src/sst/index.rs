//! Exact uniform-grid bucket index over the scaled (x, y) plane.
//!
//! Buckets only see position, so queries scan ring by ring and stop once the
//! planar lower bound of the next ring exceeds the best full-metric distance.
//! When the rings to scan would outnumber the stored ids, a flat scan is cheaper.

use crate::vehicle::VehicleState;

use super::metric::StateMetric;

const ABSENT: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct BucketIndex {
    origin: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
    items: Vec<usize>,
    slots: Vec<usize>,
}

impl BucketIndex {
    /// `min`/`max` are scaled plane coordinates of the indexed region.
    pub fn new(min: (f64, f64), max: (f64, f64), cell: f64) -> Self {
        let cols = (((max.0 - min.0) / cell).ceil() as usize).clamp(1, 2048);
        let rows = (((max.1 - min.1) / cell).ceil() as usize).clamp(1, 2048);
        Self {
            origin: min,
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
            items: Vec::new(),
            slots: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    fn cell_of(&self, p: (f64, f64)) -> (usize, usize) {
        let c = ((p.0 - self.origin.0) / self.cell).floor();
        let r = ((p.1 - self.origin.1) / self.cell).floor();
        (
            (c.max(0.0) as usize).min(self.cols - 1),
            (r.max(0.0) as usize).min(self.rows - 1),
        )
    }

    pub fn insert(&mut self, p: (f64, f64), id: usize) {
        let (c, r) = self.cell_of(p);
        self.buckets[r * self.cols + c].push(id);
        if self.slots.len() <= id {
            self.slots.resize(id + 1, ABSENT);
        }
        self.slots[id] = self.items.len();
        self.items.push(id);
    }

    pub fn remove(&mut self, p: (f64, f64), id: usize) -> bool {
        let (c, r) = self.cell_of(p);
        let bucket = &mut self.buckets[r * self.cols + c];
        let Some(pos) = bucket.iter().position(|&x| x == id) else {
            return false;
        };
        bucket.swap_remove(pos);
        let slot = self.slots[id];
        self.items.swap_remove(slot);
        if let Some(&moved) = self.items.get(slot) {
            self.slots[moved] = slot;
        }
        self.slots[id] = ABSENT;
        true
    }

    fn visit_ring(&self, center: (usize, usize), ring: usize, mut f: impl FnMut(usize)) {
        let (c0, r0) = (center.0 as isize, center.1 as isize);
        let k = ring as isize;
        let (cols, rows) = (self.cols as isize, self.rows as isize);
        let mut visit = |c: isize, r: isize| {
            if c >= 0 && r >= 0 && c < cols && r < rows {
                for &id in &self.buckets[(r * cols + c) as usize] {
                    f(id);
                }
            }
        };
        if k == 0 {
            visit(c0, r0);
            return;
        }
        for c in (c0 - k)..=(c0 + k) {
            visit(c, r0 - k);
            visit(c, r0 + k);
        }
        for r in (r0 - k + 1)..=(r0 + k - 1) {
            visit(c0 - k, r);
            visit(c0 + k, r);
        }
    }

    fn max_ring(&self) -> usize {
        self.cols.max(self.rows)
    }

    fn ring_cost(ring: usize) -> usize {
        (2 * ring + 1) * (2 * ring + 1)
    }

    /// All ids within `radius` of `q`, as (distance, id).
    pub fn within(
        &self,
        q: &VehicleState,
        radius: f64,
        metric: &StateMetric,
        state: impl Fn(usize) -> VehicleState,
        out: &mut Vec<(f64, usize)>,
    ) {
        out.clear();
        let mut consider = |id: usize| {
            let d = metric.distance(q, &state(id));
            if d <= radius {
                out.push((d, id));
            }
        };
        let rings = ((radius / self.cell).ceil() as usize + 1).min(self.max_ring());
        if Self::ring_cost(rings) > 2 * self.items.len() + 16 {
            self.items.iter().for_each(|&id| consider(id));
            return;
        }
        let center = self.cell_of(metric.plane(q));
        for ring in 0..=rings {
            self.visit_ring(center, ring, &mut consider);
        }
    }

    /// Nearest id, ties broken by the smaller id.
    pub fn nearest(
        &self,
        q: &VehicleState,
        metric: &StateMetric,
        state: impl Fn(usize) -> VehicleState,
    ) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        let consider = |best: &mut Option<(f64, usize)>, id: usize| {
            let d = metric.distance(q, &state(id));
            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
                *best = Some((d, id));
            }
        };
        let center = self.cell_of(metric.plane(q));
        let flat_limit = 2 * self.items.len() + 16;
        for ring in 0..=self.max_ring() {
            if Self::ring_cost(ring) > flat_limit {
                self.items.iter().for_each(|&id| consider(&mut best, id));
                return best;
            }
            self.visit_ring(center, ring, |id| consider(&mut best, id));
            if let Some((d, _)) = best {
                // every id beyond this ring is at least `ring` cells away in the plane
                if ring as f64 * self.cell > d {
                    break;
                }
            }
        }
        best
    }
}
