//! 4-connected component labelling of binary masks.

use crate::imaging::BinaryMask;

/// A maximal 4-connected foreground region. Pixels are `(row, col)` in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    id: u32,
    pixels: Vec<(usize, usize)>,
    bbox: (usize, usize, usize, usize),
    centroid: (f64, f64),
}

impl Component {
    /// Builds a component from its pixels. Returns `None` for an empty set.
    /// Connectivity is not checked; callers that build components by hand
    /// are responsible for it.
    pub fn from_pixels(id: u32, mut pixels: Vec<(usize, usize)>) -> Option<Self> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable();
        pixels.dedup();
        let mut bbox = (usize::MAX, usize::MAX, 0, 0);
        let (mut sr, mut sc) = (0.0, 0.0);
        for &(r, c) in &pixels {
            bbox.0 = bbox.0.min(r);
            bbox.1 = bbox.1.min(c);
            bbox.2 = bbox.2.max(r);
            bbox.3 = bbox.3.max(c);
            sr += r as f64;
            sc += c as f64;
        }
        let n = pixels.len() as f64;
        Some(Self {
            id,
            pixels,
            bbox,
            centroid: (sr / n, sc / n),
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn area_px(&self) -> usize {
        self.pixels.len()
    }

    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        self.bbox
    }

    /// `(row, col)` mean of pixel centers.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (r0, c0, r1, c1) = self.bbox;
        if row < r0 || row > r1 || col < c0 || col > c1 {
            return false;
        }
        self.pixels.binary_search(&(row, col)).is_ok()
    }

    /// Number of shared pixels; both pixel lists are sorted so this is a merge.
    pub fn intersection_size(&self, other: &Component) -> usize {
        let (a, b) = (&self.pixels, &other.pixels);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Pixels with at least one 4-neighbor outside the component.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        self.pixels
            .iter()
            .copied()
            .filter(|&(r, c)| {
                r == 0
                    || c == 0
                    || !self.contains(r - 1, c)
                    || !self.contains(r + 1, c)
                    || !self.contains(r, c - 1)
                    || !self.contains(r, c + 1)
            })
            .collect()
    }
}

/// The components of one mask, ids `1..=k` in raster order of first pixel
/// (filtered sets keep the original ids).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    height: usize,
    width: usize,
    components: Vec<Component>,
}

impl ComponentSet {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            components: Vec::new(),
        }
    }

    /// Assembles a set from components already known to be disjoint and
    /// within bounds.
    pub fn from_components(height: usize, width: usize, components: Vec<Component>) -> Self {
        Self {
            height,
            width,
            components,
        }
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Component> {
        self.components.iter()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn get(&self, index: usize) -> Option<&Component> {
        self.components.get(index)
    }

    pub fn by_id(&self, id: u32) -> Option<&Component> {
        self.components
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.components[i])
            .or_else(|| self.components.iter().find(|c| c.id == id))
    }

    /// Keeps the components for which `keep` is true, preserving ids and order.
    pub fn retain<F: FnMut(&Component) -> bool>(&self, mut keep: F) -> ComponentSet {
        ComponentSet {
            height: self.height,
            width: self.width,
            components: self.components.iter().filter(|c| keep(c)).cloned().collect(),
        }
    }

    /// Per-pixel index+1 into `components()`, 0 for background.
    pub fn index_map(&self) -> Vec<u32> {
        let mut map = vec![0u32; self.height * self.width];
        for (i, c) in self.components.iter().enumerate() {
            for &(r, col) in &c.pixels {
                map[r * self.width + col] = i as u32 + 1;
            }
        }
        map
    }

    /// Per-pixel component id, 0 for background.
    pub fn label_map(&self) -> Vec<u32> {
        let mut map = vec![0u32; self.height * self.width];
        for c in &self.components {
            for &(r, col) in &c.pixels {
                map[r * self.width + col] = c.id;
            }
        }
        map
    }

    pub fn total_area(&self) -> usize {
        self.components.iter().map(Component::area_px).sum()
    }
}

impl<'a> IntoIterator for &'a ComponentSet {
    type Item = &'a Component;
    type IntoIter = std::slice::Iter<'a, Component>;

    fn into_iter(self) -> Self::IntoIter {
        self.components.iter()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labelling with 4-connectivity.
pub fn label_components(mask: &BinaryMask) -> ComponentSet {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut provisional = vec![0u32; w * h];
    let mut sets = DisjointSet::new();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !bits[i] {
                continue;
            }
            let up = if r > 0 { provisional[i - w] } else { 0 };
            let left = if c > 0 { provisional[i - 1] } else { 0 };
            provisional[i] = match (up, left) {
                (0, 0) => sets.make(),
                (u, 0) => u,
                (0, l) => l,
                (u, l) if u == l => u,
                (u, l) => sets.union(u, l),
            };
        }
    }

    // Resolve roots to final ids in raster order of first pixel.
    let mut final_id = vec![0u32; sets.parent.len()];
    let mut pixels: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let p = provisional[r * w + c];
            if p == 0 {
                continue;
            }
            let root = sets.find(p) as usize;
            if final_id[root] == 0 {
                pixels.push(Vec::new());
                final_id[root] = pixels.len() as u32;
            }
            pixels[final_id[root] as usize - 1].push((r, c));
        }
    }

    let components = pixels
        .into_iter()
        .enumerate()
        .map(|(k, px)| Component::from_pixels(k as u32 + 1, px).expect("labelled components are non-empty"))
        .collect();
    ComponentSet {
        height: h,
        width: w,
        components,
    }
}

pub fn mask_from_components(set: &ComponentSet) -> BinaryMask {
    let mut mask = BinaryMask::blank(set.width, set.height);
    for c in &set.components {
        for &(r, col) in &c.pixels {
            mask.set(r, col, true);
        }
    }
    mask
}
