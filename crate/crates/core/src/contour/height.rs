//! Height process `H_t = #{0 < s <= t : X_{s-} < inf_{[s,t]} X}` and its
//! local times.

use std::io::{self, Write};

use super::ContourPath;

/// Piecewise-constant `H` on `[0, kill_time)`: `H = breaks[i].1` on
/// `[breaks[i].0, breaks[i+1].0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightProfile {
    breaks: Vec<(f64, u32)>,
    kill_time: f64,
}

impl HeightProfile {
    /// Monotone-stack sweep: a jump stays on the stack while the path has not
    /// come back down to its pre-jump level.
    pub fn new(path: &ContourPath) -> Self {
        let kill = path.kill_time();
        let mut breaks: Vec<(f64, u32)> = vec![(0.0, 0)];
        let mut stack: Vec<f64> = Vec::new();
        let record = |breaks: &mut Vec<(f64, u32)>, time: f64, h: usize| {
            let last = breaks.last_mut().expect("nonempty");
            let time = time.max(last.0);
            if time == last.0 {
                last.1 = h as u32;
            } else {
                breaks.push((time, h as u32));
            }
        };
        for (k, jump) in path.jumps().iter().enumerate() {
            let level = path.level_before(k);
            let p = path.prefix[k];
            while let Some(&top) = stack.last() {
                if top < level {
                    break;
                }
                stack.pop();
                record(&mut breaks, crossing(p, top).min(jump.time), stack.len());
            }
            stack.push(level);
            record(&mut breaks, jump.time, stack.len());
        }
        while let Some(top) = stack.pop() {
            record(&mut breaks, crossing(kill, top).min(kill), stack.len());
        }
        if breaks.len() > 1 && breaks.last().map(|b| b.0) == Some(kill) {
            // a closing at the kill time carries no mass
            breaks.pop();
        }
        Self {
            breaks,
            kill_time: kill,
        }
    }

    pub fn breaks(&self) -> &[(f64, u32)] {
        &self.breaks
    }

    pub fn kill_time(&self) -> f64 {
        self.kill_time
    }

    pub fn at(&self, t: f64) -> u32 {
        let i = self.breaks.partition_point(|b| b.0 <= t);
        self.breaks[i.saturating_sub(1)].1
    }

    /// `L_n`: time spent at height `n`.
    pub fn local_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (i, &(t, h)) in self.breaks.iter().enumerate() {
            let end = self.breaks.get(i + 1).map_or(self.kill_time, |b| b.0);
            let h = h as usize;
            if out.len() <= h {
                out.resize(h + 1, 0.0);
            }
            out[h] += end - t;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header: &str) -> io::Result<()> {
        writeln!(out, "# schema=1 {header}")?;
        writeln!(out, "t_break,H")?;
        for &(t, h) in &self.breaks {
            writeln!(out, "{t:.16e},{h}")?;
        }
        Ok(())
    }
}

/// Smallest float `t` with `p - t <= level`, i.e. the first time a segment
/// whose value is `p - t` is down to `level`, with the rounding of `value`.
fn crossing(p: f64, level: f64) -> f64 {
    let mut t = p - level;
    while p - t > level {
        t = t.next_up();
    }
    while p - t.next_down() <= level {
        t = t.next_down();
    }
    t
}

/// `H_t` straight from the definition, `O(n)` per query; a test oracle.
pub fn literal_height(path: &ContourPath, t: f64) -> u32 {
    let mut inf = path.value(t);
    let mut h = 0;
    for j in (0..path.jumps().partition_point(|j| j.time <= t)).rev() {
        let before = path.level_before(j);
        if before < inf {
            h += 1;
        }
        inf = inf.min(before);
    }
    h
}
