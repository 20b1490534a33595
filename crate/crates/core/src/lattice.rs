//! Geometry of the periodic square lattice and of its spacetime extension.
//!
//! Sites are indexed `y * d + x`. Every site owns one vertex, one plaquette
//! (lower-left corner at the vertex) and two edges: `2 * site` is the
//! horizontal edge to the right, `2 * site + 1` the vertical edge upward.
//! X errors live on edges; their syndromes live on plaquettes, so error
//! strings are strings on the dual lattice.

use std::ops::BitXor;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Torus2D {
    d: usize,
}

impl Torus2D {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Size(format!("code distance d={d} must be at least 2")));
        }
        Ok(Torus2D { d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of plaquettes, equal to the number of vertices.
    pub fn n(&self) -> usize {
        self.d * self.d
    }

    pub fn n_vertices(&self) -> usize {
        self.n()
    }

    pub fn n_edges(&self) -> usize {
        2 * self.n()
    }

    pub fn n_plaquettes(&self) -> usize {
        self.n()
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        (y % self.d) * self.d + x % self.d
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.d, site / self.d)
    }

    pub fn h_edge(&self, x: usize, y: usize) -> usize {
        2 * self.site(x, y)
    }

    pub fn v_edge(&self, x: usize, y: usize) -> usize {
        2 * self.site(x, y) + 1
    }

    pub fn edge_dir(&self, e: usize) -> Dir {
        if e % 2 == 0 {
            Dir::Horizontal
        } else {
            Dir::Vertical
        }
    }

    fn prev(&self, c: usize) -> usize {
        (c + self.d - 1) % self.d
    }

    pub fn plaquette_edges(&self, p: usize) -> [usize; 4] {
        let (x, y) = self.coords(p);
        [
            self.h_edge(x, y),
            self.h_edge(x, y + 1),
            self.v_edge(x, y),
            self.v_edge(x + 1, y),
        ]
    }

    pub fn edge_plaquettes(&self, e: usize) -> [usize; 2] {
        let (x, y) = self.coords(e / 2);
        match self.edge_dir(e) {
            Dir::Horizontal => [self.site(x, y), self.site(x, self.prev(y))],
            Dir::Vertical => [self.site(x, y), self.site(self.prev(x), y)],
        }
    }

    pub fn edge_vertices(&self, e: usize) -> [usize; 2] {
        let (x, y) = self.coords(e / 2);
        match self.edge_dir(e) {
            Dir::Horizontal => [self.site(x, y), self.site(x + 1, y)],
            Dir::Vertical => [self.site(x, y), self.site(x, y + 1)],
        }
    }

    pub fn vertex_edges(&self, v: usize) -> [usize; 4] {
        let (x, y) = self.coords(v);
        [
            self.h_edge(x, y),
            self.h_edge(self.prev(x), y),
            self.v_edge(x, y),
            self.v_edge(x, self.prev(y)),
        ]
    }

    /// Edges with odd multiplicity in the boundary of a plaquette multiset.
    pub fn boundary(&self, plaquettes: &[usize]) -> Vec<usize> {
        let mut odd = vec![false; self.n_edges()];
        for &p in plaquettes {
            for e in self.plaquette_edges(p) {
                odd[e] ^= true;
            }
        }
        collect_true(&odd)
    }

    /// Plaquettes with odd incidence from an edge multiset (the syndrome of an X string).
    pub fn syndrome(&self, edges: &[usize]) -> Vec<usize> {
        let mut odd = vec![false; self.n_plaquettes()];
        for &e in edges {
            for p in self.edge_plaquettes(e) {
                odd[p] ^= true;
            }
        }
        collect_true(&odd)
    }

    /// Edge support of the reference logical Z operator `which` (0 or 1).
    pub fn reference_cycle(&self, which: usize) -> Vec<usize> {
        (0..self.d)
            .map(|i| if which == 0 { self.v_edge(0, i) } else { self.h_edge(i, 0) })
            .collect()
    }

    /// A minimal closed dual string of class (1,0) for `which = 0`, (0,1) for `which = 1`.
    pub fn dual_winding_cycle(&self, which: usize) -> Vec<usize> {
        (0..self.d)
            .map(|i| if which == 0 { self.v_edge(i, 0) } else { self.h_edge(0, i) })
            .collect()
    }

    /// Parities of the intersections with the two reference cycles. Defined for
    /// open strings as well; it is the homology class when the string is closed.
    pub fn crossing_class(&self, edges: &[usize]) -> HomologyClass {
        let mut w1 = false;
        let mut w2 = false;
        for &e in edges {
            let (x, y) = self.coords(e / 2);
            match self.edge_dir(e) {
                Dir::Vertical if x == 0 => w1 ^= true,
                Dir::Horizontal if y == 0 => w2 ^= true,
                _ => {}
            }
        }
        HomologyClass { w1, w2 }
    }

    pub fn homology_class(&self, edges: &[usize]) -> Result<HomologyClass> {
        let open = self.syndrome(edges).len();
        if open > 0 {
            return Err(Error::OpenString(open));
        }
        Ok(self.crossing_class(edges))
    }

    fn cyclic_steps(&self, from: usize, to: usize) -> (usize, bool) {
        let fwd = (to + self.d - from) % self.d;
        if fwd <= self.d - fwd {
            (fwd, true)
        } else {
            (self.d - fwd, false)
        }
    }

    pub fn dual_distance(&self, p1: usize, p2: usize) -> usize {
        let (x1, y1) = self.coords(p1);
        let (x2, y2) = self.coords(p2);
        self.cyclic_steps(x1, x2).0 + self.cyclic_steps(y1, y2).0
    }

    /// A shortest dual path joining plaquettes `p1` and `p2`: first along x, then along y.
    pub fn dual_path(&self, p1: usize, p2: usize) -> Vec<usize> {
        let (mut x, mut y) = self.coords(p1);
        let (x2, y2) = self.coords(p2);
        let mut path = Vec::new();
        let (nx, fx) = self.cyclic_steps(x, x2);
        for _ in 0..nx {
            // Crossing the vertical edge on the right of p(x,y) reaches p(x+1,y).
            if fx {
                path.push(self.v_edge(x + 1, y));
                x = (x + 1) % self.d;
            } else {
                path.push(self.v_edge(x, y));
                x = self.prev(x);
            }
        }
        let (ny, fy) = self.cyclic_steps(y, y2);
        for _ in 0..ny {
            if fy {
                path.push(self.h_edge(x, y + 1));
                y = (y + 1) % self.d;
            } else {
                path.push(self.h_edge(x, y));
                y = self.prev(y);
            }
        }
        path
    }
}

pub(crate) fn collect_true(v: &[bool]) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Winding parities of a closed dual string around the two cycles of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct HomologyClass {
    pub w1: bool,
    pub w2: bool,
}

impl HomologyClass {
    pub const TRIVIAL: HomologyClass = HomologyClass { w1: false, w2: false };

    pub fn index(self) -> usize {
        self.w1 as usize + 2 * self.w2 as usize
    }

    pub fn from_index(i: usize) -> Self {
        HomologyClass { w1: i & 1 == 1, w2: i & 2 == 2 }
    }

    pub fn all() -> [HomologyClass; 4] {
        [0, 1, 2, 3].map(HomologyClass::from_index)
    }

    pub fn is_trivial(self) -> bool {
        !self.w1 && !self.w2
    }
}

impl BitXor for HomologyClass {
    type Output = HomologyClass;
    fn bitxor(self, o: Self) -> Self {
        HomologyClass { w1: self.w1 ^ o.w1, w2: self.w2 ^ o.w2 }
    }
}

impl std::fmt::Display for HomologyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.w1 as u8, self.w2 as u8)
    }
}

/// How the finite time window is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TimeBoundary {
    /// Anchored to the prepared state at the bottom, last round as noisy as the others.
    #[default]
    Open,
    /// A perfect readout round closes the window at the top.
    IdealFinalRound,
    /// First Pauli step maximally mixed: the record starts long after the preparation.
    FreeStart,
}

impl TimeBoundary {
    pub fn name(self) -> &'static str {
        match self {
            TimeBoundary::Open => "open",
            TimeBoundary::IdealFinalRound => "ideal-final-round",
            TimeBoundary::FreeStart => "free-start",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "open" => Some(TimeBoundary::Open),
            "ideal-final-round" => Some(TimeBoundary::IdealFinalRound),
            "free-start" => Some(TimeBoundary::FreeStart),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plaq3 {
    /// Readout of plaquette `p` in round `t`.
    Space { p: usize, t: usize },
    /// Pauli step `t` on edge `e`, between spacelike layers `t-1` and `t`.
    Time { e: usize, t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge3 {
    Space { e: usize, t: usize },
    /// Joins vertex `v` of layer `t-1` to layer `t`.
    Time { v: usize, t: usize },
}

/// The spacetime lattice of `t_steps` Pauli steps each followed by a readout round.
///
/// Spacelike edges of the virtual layer `-1` are frozen to +1 and carry no index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Spacetime3D {
    torus: Torus2D,
    t_steps: usize,
    boundary: TimeBoundary,
}

impl Spacetime3D {
    pub fn new(torus: Torus2D, t_steps: usize, boundary: TimeBoundary) -> Result<Self> {
        if t_steps < 1 {
            return Err(Error::Size("number of time steps T must be at least 1".into()));
        }
        Ok(Spacetime3D { torus, t_steps, boundary })
    }

    pub fn torus(&self) -> &Torus2D {
        &self.torus
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn time_boundary(&self) -> TimeBoundary {
        self.boundary
    }

    pub fn n(&self) -> usize {
        self.torus.n()
    }

    pub fn n_space_plaquettes(&self) -> usize {
        self.n() * self.t_steps
    }

    pub fn n_time_plaquettes(&self) -> usize {
        2 * self.n() * self.t_steps
    }

    pub fn n_plaquettes(&self) -> usize {
        3 * self.n() * self.t_steps
    }

    pub fn n_space_edges(&self) -> usize {
        2 * self.n() * self.t_steps
    }

    pub fn n_time_edges(&self) -> usize {
        self.n() * self.t_steps
    }

    pub fn n_edges(&self) -> usize {
        3 * self.n() * self.t_steps
    }

    pub fn plaq_index(&self, pl: Plaq3) -> usize {
        match pl {
            Plaq3::Space { p, t } => t * self.n() + p,
            Plaq3::Time { e, t } => self.n_space_plaquettes() + t * 2 * self.n() + e,
        }
    }

    pub fn plaq(&self, i: usize) -> Plaq3 {
        let ns = self.n_space_plaquettes();
        if i < ns {
            Plaq3::Space { p: i % self.n(), t: i / self.n() }
        } else {
            let j = i - ns;
            Plaq3::Time { e: j % (2 * self.n()), t: j / (2 * self.n()) }
        }
    }

    pub fn edge_index(&self, ed: Edge3) -> usize {
        match ed {
            Edge3::Space { e, t } => t * 2 * self.n() + e,
            Edge3::Time { v, t } => self.n_space_edges() + t * self.n() + v,
        }
    }

    pub fn edge(&self, i: usize) -> Edge3 {
        let ns = self.n_space_edges();
        if i < ns {
            Edge3::Space { e: i % (2 * self.n()), t: i / (2 * self.n()) }
        } else {
            let j = i - ns;
            Edge3::Time { v: j % self.n(), t: j / self.n() }
        }
    }

    /// Dynamical boundary edges of a plaquette (3 for timelike plaquettes of step 0).
    pub fn plaq_edges(&self, i: usize) -> Vec<usize> {
        match self.plaq(i) {
            Plaq3::Space { p, t } => self
                .torus
                .plaquette_edges(p)
                .iter()
                .map(|&e| self.edge_index(Edge3::Space { e, t }))
                .collect(),
            Plaq3::Time { e, t } => {
                let mut out = Vec::with_capacity(4);
                if t > 0 {
                    out.push(self.edge_index(Edge3::Space { e, t: t - 1 }));
                }
                out.push(self.edge_index(Edge3::Space { e, t }));
                for v in self.torus.edge_vertices(e) {
                    out.push(self.edge_index(Edge3::Time { v, t }));
                }
                out
            }
        }
    }

    pub fn edge_plaqs(&self, i: usize) -> Vec<usize> {
        match self.edge(i) {
            Edge3::Space { e, t } => {
                let mut out: Vec<usize> = self
                    .torus
                    .edge_plaquettes(e)
                    .iter()
                    .map(|&p| self.plaq_index(Plaq3::Space { p, t }))
                    .collect();
                out.push(self.plaq_index(Plaq3::Time { e, t }));
                if t + 1 < self.t_steps {
                    out.push(self.plaq_index(Plaq3::Time { e, t: t + 1 }));
                }
                out
            }
            Edge3::Time { v, t } => self
                .torus
                .vertex_edges(v)
                .iter()
                .map(|&e| self.plaq_index(Plaq3::Time { e, t }))
                .collect(),
        }
    }

    /// Edges meeting at vertex `v` of layer `t`.
    pub fn vertex_edges(&self, v: usize, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .torus
            .vertex_edges(v)
            .iter()
            .map(|&e| self.edge_index(Edge3::Space { e, t }))
            .collect();
        out.push(self.edge_index(Edge3::Time { v, t }));
        if t + 1 < self.t_steps {
            out.push(self.edge_index(Edge3::Time { v, t: t + 1 }));
        }
        out
    }

    /// Mod-2 boundary of a plaquette multiset, as sorted edge indices.
    pub fn boundary(&self, plaqs: &[usize]) -> Vec<usize> {
        let mut odd = vec![false; self.n_edges()];
        for &pl in plaqs {
            for e in self.plaq_edges(pl) {
                odd[e] ^= true;
            }
        }
        collect_true(&odd)
    }

    /// True when every dynamical vertex meets an even number of the given edges.
    pub fn is_closed(&self, edges: &[usize]) -> bool {
        let mut odd = vec![false; self.n_edges()];
        for &e in edges {
            odd[e] ^= true;
        }
        (0..self.t_steps).all(|t| {
            (0..self.n()).all(|v| {
                self.vertex_edges(v, t).iter().filter(|&&e| odd[e]).count() % 2 == 0
            })
        })
    }

    /// Projection to the 2D lattice: timelike plaquettes dropped, spacelike ones
    /// counted mod 2 per spatial site.
    pub fn project_pi(&self, plaqs: &[usize]) -> Vec<usize> {
        let mut odd = vec![false; self.n()];
        for &pl in plaqs {
            if let Plaq3::Space { p, .. } = self.plaq(pl) {
                odd[p] ^= true;
            }
        }
        collect_true(&odd)
    }

    /// Product of ±1 edge spins around a plaquette; frozen edges count as +1.
    pub fn holonomy(&self, tau: &[i8], pl: usize) -> i8 {
        self.plaq_edges(pl).iter().fold(1, |acc, &e| acc * tau[e])
    }
}

/// Rectangle descriptors for Wilson regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rect {
    /// `wx × wy` spacelike plaquettes with lower-left corner `(x0, y0)` in round `t`.
    Space { t: usize, x0: usize, y0: usize, wx: usize, wy: usize },
    /// Timelike plaquettes on horizontal edges `h(x0..x0+wx, y)` for steps `t0..t0+h`.
    TimeX { y: usize, x0: usize, wx: usize, t0: usize, h: usize },
    /// Timelike plaquettes on vertical edges `v(x, y0..y0+wy)` for steps `t0..t0+h`.
    TimeY { x: usize, y0: usize, wy: usize, t0: usize, h: usize },
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Rect::Space { t, x0, y0, wx, wy } => write!(f, "space:t{t}:x{x0}:y{y0}:{wx}x{wy}"),
            Rect::TimeX { y, x0, wx, t0, h } => write!(f, "timex:y{y}:x{x0}:t{t0}:{wx}x{h}"),
            Rect::TimeY { x, y0, wy, t0, h } => write!(f, "timey:x{x}:y{y0}:t{t0}:{wy}x{h}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WilsonRegion {
    pub plaquettes: Vec<usize>,
    pub boundary: Vec<usize>,
    pub n_space_boundary: usize,
    pub n_time_boundary: usize,
    pub projection: Vec<usize>,
}

impl WilsonRegion {
    pub fn empty() -> Self {
        WilsonRegion {
            plaquettes: vec![],
            boundary: vec![],
            n_space_boundary: 0,
            n_time_boundary: 0,
            projection: vec![],
        }
    }

    pub fn from_plaquettes(st: &Spacetime3D, plaqs: &[usize]) -> Self {
        let mut odd = vec![false; st.n_plaquettes()];
        for &pl in plaqs {
            odd[pl] ^= true;
        }
        let plaquettes = collect_true(&odd);
        let boundary = st.boundary(&plaquettes);
        let n_space_boundary = boundary.iter().filter(|&&e| e < st.n_space_edges()).count();
        WilsonRegion {
            n_time_boundary: boundary.len() - n_space_boundary,
            n_space_boundary,
            projection: st.project_pi(&plaquettes),
            plaquettes,
            boundary,
        }
    }

    pub fn rectangle(st: &Spacetime3D, rect: Rect) -> Result<Self> {
        let d = st.torus().d();
        let tt = st.t_steps();
        let oob = || Err(Error::OutOfBounds(format!("{rect} on d={d}, T={tt}")));
        let mut plaqs = Vec::new();
        match rect {
            Rect::Space { t, x0, y0, wx, wy } => {
                if t >= tt || x0 >= d || y0 >= d || wx == 0 || wy == 0 || wx > d || wy > d {
                    return oob();
                }
                for j in 0..wy {
                    for i in 0..wx {
                        let p = st.torus().site(x0 + i, y0 + j);
                        plaqs.push(st.plaq_index(Plaq3::Space { p, t }));
                    }
                }
            }
            Rect::TimeX { y, x0, wx, t0, h } => {
                if y >= d || x0 >= d || wx == 0 || wx > d || h == 0 || t0 + h > tt {
                    return oob();
                }
                for t in t0..t0 + h {
                    for i in 0..wx {
                        let e = st.torus().h_edge(x0 + i, y);
                        plaqs.push(st.plaq_index(Plaq3::Time { e, t }));
                    }
                }
            }
            Rect::TimeY { x, y0, wy, t0, h } => {
                if x >= d || y0 >= d || wy == 0 || wy > d || h == 0 || t0 + h > tt {
                    return oob();
                }
                for t in t0..t0 + h {
                    for j in 0..wy {
                        let e = st.torus().v_edge(x, y0 + j);
                        plaqs.push(st.plaq_index(Plaq3::Time { e, t }));
                    }
                }
            }
        }
        Ok(Self::from_plaquettes(st, &plaqs))
    }

    pub fn area(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn perimeter(&self) -> usize {
        self.boundary.len()
    }

    /// Value of the loop operator on a spin configuration over the 3D edges.
    pub fn eval(&self, tau: &[i8]) -> i8 {
        self.boundary.iter().fold(1, |acc, &e| acc * tau[e])
    }
}
