//! Jumping chronological contour process (JCCP) of a finite chronological tree.
//!
//! The contour starts at the death level of the ancestor, decreases at unit
//! speed, and jumps by `zeta(v)` when it meets the birth level of `v`. Times
//! are derived from the prefix sums of jump sizes: a jump emitted at level
//! `alpha` after an accumulated mass `P` happens at `P - alpha`, and the
//! level at time `t` on the segment that follows is `P' - t`. Encoding,
//! decoding and the simulated paths all use this one formula, which is what
//! makes `jccp(decode(path)) == path` hold bit for bit.

mod height;

use std::io::{self, Write};

use crate::chrono_tree::{ChronologicalTree, NodeId, TreePoint};

pub use height::{literal_height, HeightProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContourError {
    #[error("tree has an infinite lifetime; truncate it first")]
    InfiniteTree,
    #[error("start level must be positive and finite, got {0}")]
    BadStart(f64),
    #[error("jump {index}: size must be positive and finite, got {size}")]
    BadSize { index: usize, size: f64 },
    #[error("jump {index} at time {time}: times must be strictly increasing and positive")]
    NonMonotoneTime { index: usize, time: f64 },
    #[error("jump at time {time} happens after the path was killed (level {level})")]
    AfterKill { time: f64, level: f64 },
    #[error("inconsistent path at time {0}: jump lands on a closed level")]
    Inconsistent(f64),
    #[error("time {time} outside [0, {kill})")]
    TimeOutOfRange { time: f64, kill: f64 },
    #[error("level must be positive, got {0}")]
    BadLevel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    start_level: f64,
    jumps: Vec<Jump>,
    /// `prefix[j] = start + sum of the first j sizes`; `prefix[n]` is the kill time.
    prefix: Vec<f64>,
}

impl ContourPath {
    pub fn new(start_level: f64, jumps: Vec<Jump>) -> Result<Self, ContourError> {
        if !(start_level > 0.0 && start_level.is_finite()) {
            return Err(ContourError::BadStart(start_level));
        }
        let mut prefix = Vec::with_capacity(jumps.len() + 1);
        let mut acc = start_level;
        let mut last = 0.0;
        prefix.push(acc);
        for (index, j) in jumps.iter().enumerate() {
            if !(j.size > 0.0 && j.size.is_finite()) {
                return Err(ContourError::BadSize { index, size: j.size });
            }
            if !(j.time > last) {
                return Err(ContourError::NonMonotoneTime { index, time: j.time });
            }
            let level = acc - j.time;
            if !(level > 0.0) {
                return Err(ContourError::AfterKill { time: j.time, level });
            }
            last = j.time;
            acc += j.size;
            prefix.push(acc);
        }
        Ok(Self {
            start_level,
            jumps,
            prefix,
        })
    }

    pub(crate) fn from_parts_unchecked(start_level: f64, jumps: Vec<Jump>, prefix: Vec<f64>) -> Self {
        debug_assert_eq!(prefix.len(), jumps.len() + 1);
        Self {
            start_level,
            jumps,
            prefix,
        }
    }

    pub fn start_level(&self) -> f64 {
        self.start_level
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// `T_0 = start + sum of sizes`.
    pub fn kill_time(&self) -> f64 {
        *self.prefix.last().expect("prefix is never empty")
    }

    /// `X_{t-}` at jump `j`.
    pub fn level_before(&self, j: usize) -> f64 {
        self.prefix[j] - self.jumps[j].time
    }

    /// `X_t` right after jump `j`.
    pub fn level_after(&self, j: usize) -> f64 {
        self.prefix[j + 1] - self.jumps[j].time
    }

    /// Number of jumps at times `<= t`.
    fn jumps_upto(&self, t: f64) -> usize {
        self.jumps.partition_point(|j| j.time <= t)
    }

    /// `X_t`, the right-continuous value; `0` from the kill time on.
    pub fn value(&self, t: f64) -> f64 {
        if t >= self.kill_time() {
            return 0.0;
        }
        self.prefix[self.jumps_upto(t)] - t.max(0.0)
    }

    /// Segments `(t_start, t_end, level_top)`: on `[t_start, t_end)` the path
    /// is `level_top - (t - t_start)`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.jumps.len();
        (0..=n).map(move |k| {
            let (t0, top) = if k == 0 {
                (0.0, self.start_level)
            } else {
                (self.jumps[k - 1].time, self.level_after(k - 1))
            };
            let t1 = if k < n { self.jumps[k].time } else { self.kill_time() };
            (t0, t1, top)
        })
    }

    fn check_time(&self, t: f64) -> Result<(), ContourError> {
        if t >= 0.0 && t < self.kill_time() {
            Ok(())
        } else {
            Err(ContourError::TimeOutOfRange {
                time: t,
                kill: self.kill_time(),
            })
        }
    }

    /// `inf_{s <= r <= t} X_r`, the level of the coalescence point of the
    /// points explored at `s` and `t`.
    pub fn coalescence_level(&self, s: f64, t: f64) -> Result<f64, ContourError> {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        self.check_time(s)?;
        self.check_time(t)?;
        let lo = self.jumps_upto(s);
        let hi = self.jumps_upto(t);
        let mut inf = self.value(t).min(self.value(s));
        for j in lo..hi {
            inf = inf.min(self.level_before(j));
        }
        Ok(inf)
    }

    /// Index of the jump that started the exploration of the individual
    /// visited at `t`, `None` for the ancestor.
    pub fn explored_jump(&self, t: f64) -> Result<Option<usize>, ContourError> {
        self.check_time(t)?;
        let mut running = self.value(t);
        for j in (0..self.jumps_upto(t)).rev() {
            let before = self.level_before(j);
            if before < running {
                return Ok(Some(j));
            }
            running = running.min(before);
        }
        Ok(None)
    }

    /// `sup{s <= t : X_s < X_t} ∨ 0`: the first visit of the individual
    /// explored at `t`.
    pub fn first_visit(&self, t: f64) -> Result<f64, ContourError> {
        Ok(self
            .explored_jump(t)?
            .map_or(0.0, |j| self.jumps[j].time))
    }

    /// All times with `X_t = sigma`, increasing.
    pub fn level_visits(&self, sigma: f64) -> Result<Vec<f64>, ContourError> {
        if !(sigma > 0.0) {
            return Err(ContourError::BadLevel(sigma));
        }
        Ok(self
            .segments()
            .filter(|&(t0, t1, top)| sigma <= top && sigma > top - (t1 - t0))
            .map(|(t0, _, top)| t0 + (top - sigma))
            .collect())
    }

    /// Number of segments starting within `tol` of `tau` (from below): the
    /// visits of a barrier the path is reflected at, robust to the rounding
    /// of `P' - t`.
    pub fn barrier_visits(&self, tau: f64, tol: f64) -> usize {
        self.segments().filter(|&(_, _, top)| top >= tau - tol).count()
    }

    /// Minimum of the excursion that starts at the first barrier visit and
    /// ends at the next one (or at the kill, giving `0`). `None` if the
    /// barrier is never reached.
    pub fn first_excursion_min(&self, tau: f64, tol: f64) -> Option<f64> {
        let mut segs = self.segments().skip_while(|&(_, _, top)| top < tau - tol);
        let (t0, t1, top) = segs.next()?;
        let mut min = top - (t1 - t0);
        for (t0, t1, top) in segs {
            if top >= tau - tol {
                return Some(min);
            }
            min = min.min(top - (t1 - t0));
        }
        Some(0.0)
    }

    /// CSV with rows `event_type,time,level_before,level_after`.
    pub fn write_csv<W: Write>(&self, out: &mut W, header: &str) -> io::Result<()> {
        writeln!(out, "# schema=1 {header}")?;
        writeln!(out, "event_type,time,level_before,level_after")?;
        writeln!(out, "start,{:.16e},{:.16e},{:.16e}", 0.0, 0.0, self.start_level)?;
        for (j, jump) in self.jumps.iter().enumerate() {
            writeln!(
                out,
                "jump,{:.16e},{:.16e},{:.16e}",
                jump.time,
                self.level_before(j),
                self.level_after(j)
            )?;
        }
        let kill = self.kill_time();
        let last = self.prefix[self.jumps.len()] - kill;
        writeln!(out, "kill,{kill:.16e},{last:.16e},{:.16e}", 0.0)
    }
}

/// The contour of a tree together with its visit schedule.
#[derive(Debug, Clone)]
pub struct Exploration {
    path: ContourPath,
    /// Jump time of each vertex (arena order); `0` for the ancestor.
    visit: Vec<f64>,
    /// Vertex of each jump.
    jump_node: Vec<NodeId>,
    /// Total length of the subtree of each vertex.
    subtree: Vec<f64>,
}

impl Exploration {
    pub fn path(&self) -> &ContourPath {
        &self.path
    }

    pub fn into_path(self) -> ContourPath {
        self.path
    }

    pub fn visit_time(&self, id: NodeId) -> f64 {
        self.visit[id.0]
    }

    pub fn jump_node(&self, j: usize) -> NodeId {
        self.jump_node[j]
    }

    /// Exploration time `phi(x)` of a point of `tree` (the tree the
    /// exploration was built from).
    pub fn time_of(&self, tree: &ChronologicalTree, x: &TreePoint) -> Result<f64, crate::chrono_tree::TreeError> {
        let id = tree.point_node(x)?;
        if id == ChronologicalTree::ROOT && x.level == 0.0 {
            return Ok(self.path.kill_time());
        }
        let below: f64 = tree
            .children(id)
            .iter()
            .filter(|&&c| tree.alpha(c) >= x.level)
            .map(|&c| self.subtree[c.0])
            .sum();
        Ok(self.visit[id.0] + (tree.omega(id) - x.level) + below)
    }

    /// The point `phi^{-1}(t)` explored at time `t`.
    pub fn point_at(&self, tree: &ChronologicalTree, t: f64) -> Result<TreePoint, ContourError> {
        let id = match self.path.explored_jump(t)? {
            Some(j) => self.jump_node[j],
            None => ChronologicalTree::ROOT,
        };
        Ok(TreePoint::new(tree.label(id), self.path.value(t)))
    }
}

/// Children of `id` in exploration order: decreasing birth level.
fn children_by_decreasing_birth(tree: &ChronologicalTree, id: NodeId) -> Vec<NodeId> {
    let mut kids = tree.children(id).to_vec();
    kids.sort_by(|a, b| tree.alpha(*b).total_cmp(&tree.alpha(*a)));
    kids
}

/// The JCCP of a finite tree.
pub fn jccp(tree: &ChronologicalTree) -> Result<ContourPath, ContourError> {
    explore(tree).map(Exploration::into_path)
}

/// The JCCP plus the visit schedule of every vertex.
pub fn explore(tree: &ChronologicalTree) -> Result<Exploration, ContourError> {
    if tree.has_infinite_lifetime() {
        return Err(ContourError::InfiniteTree);
    }
    let n = tree.len();
    let start = tree.omega(ChronologicalTree::ROOT);
    let mut jumps = Vec::with_capacity(n - 1);
    let mut prefix = Vec::with_capacity(n);
    let mut visit = vec![0.0; n];
    let mut jump_node = Vec::with_capacity(n - 1);
    let mut acc = start;
    prefix.push(acc);

    // depth-first preorder, children by decreasing birth level
    let mut stack: Vec<NodeId> = children_by_decreasing_birth(tree, ChronologicalTree::ROOT)
        .into_iter()
        .rev()
        .collect();
    while let Some(v) = stack.pop() {
        let alpha = tree.alpha(v);
        let size = tree.omega(v) - alpha;
        let time = acc - alpha;
        visit[v.0] = time;
        jumps.push(Jump { time, size });
        jump_node.push(v);
        acc += size;
        prefix.push(acc);
        stack.extend(children_by_decreasing_birth(tree, v).into_iter().rev());
    }

    let mut subtree: Vec<f64> = tree.ids().map(|id| tree.lifespan_of(id)).collect();
    for id in tree.ids().skip(1).collect::<Vec<_>>().into_iter().rev() {
        // arena order lists parents before children
        let p = tree.parent(id).expect("non-root");
        subtree[p.0] += subtree[id.0];
    }

    Ok(Exploration {
        path: ContourPath::from_parts_unchecked(start, jumps, prefix),
        visit,
        jump_node,
        subtree,
    })
}

/// Float pair `(a, w)` with `p - a == t` and `w - a == size`, `a` as close
/// to `guess` as possible. Several `a` may satisfy the first equation and
/// only some of them the second.
fn solve_birth_death(p: f64, t: f64, size: f64, guess: f64) -> Option<(f64, f64)> {
    nearby(guess)
        .filter(|&a| p - a == t)
        .find_map(|a| nearby(a + size).find(|&w| w - a == size).map(|w| (a, w)))
}

fn nearby(x: f64) -> impl Iterator<Item = f64> {
    const SPAN: usize = 64;
    let up = std::iter::successors(Some(x), |v| Some(v.next_up())).skip(1);
    let down = std::iter::successors(Some(x), |v| Some(v.next_down())).skip(1);
    std::iter::once(x).chain(up.zip(down).take(SPAN).flat_map(|(u, d)| [u, d]))
}

/// LIFO reconstruction: each jump creates a child of the individual being
/// served just before it. Children are numbered by decreasing birth level.
pub fn decode(path: &ContourPath) -> Result<ChronologicalTree, ContourError> {
    let mut tree = ChronologicalTree::new(path.start_level).map_err(|_| ContourError::BadStart(path.start_level))?;
    // served individuals, birth levels increasing towards the top
    let mut stack: Vec<NodeId> = vec![ChronologicalTree::ROOT];
    for (j, jump) in path.jumps.iter().enumerate() {
        let p = path.prefix[j];
        let level = path.level_before(j);
        while let Some(&top) = stack.last() {
            if top != ChronologicalTree::ROOT && tree.alpha(top) > level {
                stack.pop();
            } else {
                break;
            }
        }
        let parent = *stack.last().expect("root never popped");
        let (alpha, omega) =
            solve_birth_death(p, jump.time, jump.size, level).ok_or(ContourError::Inconsistent(jump.time))?;
        let younger_ok = tree
            .children(parent)
            .last()
            .is_none_or(|&c| alpha < tree.alpha(c));
        if !(alpha > tree.alpha(parent) && alpha < tree.omega(parent) && younger_ok) {
            return Err(ContourError::Inconsistent(jump.time));
        }
        let id = tree.push_child_unchecked(parent, alpha, omega);
        stack.push(id);
    }
    Ok(tree)
}
