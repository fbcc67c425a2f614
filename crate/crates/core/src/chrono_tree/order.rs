//! Points of a chronological tree: classification, genealogy, coalescence
//! and the linear (exploration) order.

use std::cmp::Ordering;

use super::{ChronologicalTree, NodeId, TreeError, TreePoint, UlamLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Root,
    Leaf,
    Simple,
    Branching,
}

impl ChronologicalTree {
    /// Resolves a point to its vertex, checking `alpha < level <= omega`
    /// (or that it is the root point).
    pub fn point_node(&self, x: &TreePoint) -> Result<NodeId, TreeError> {
        let id = self
            .find(&x.label)
            .ok_or_else(|| TreeError::InvalidPoint(x.clone()))?;
        let (a, w) = (self.alpha(id), self.omega(id));
        let root_point = id == Self::ROOT && x.level == 0.0;
        if root_point || (a < x.level && x.level <= w) {
            Ok(id)
        } else {
            Err(TreeError::InvalidPoint(x.clone()))
        }
    }

    pub fn classify_point(&self, x: &TreePoint) -> Result<PointKind, TreeError> {
        let id = self.point_node(x)?;
        if id == Self::ROOT && x.level == 0.0 {
            return Ok(PointKind::Root);
        }
        if self.children(id).iter().any(|&c| self.alpha(c) == x.level) {
            Ok(PointKind::Branching)
        } else if x.level == self.omega(id) {
            Ok(PointKind::Leaf)
        } else {
            Ok(PointKind::Simple)
        }
    }

    /// Level at which the lineage of `x` leaves generation `depth` of its
    /// ancestry: its own level if `depth` is the generation of `x`, otherwise
    /// the birth level of the ancestor at generation `depth + 1`.
    fn exit_level(&self, x: &TreePoint, id: NodeId, depth: usize) -> f64 {
        let gen = self.generation(id);
        if gen == depth {
            return x.level;
        }
        let mut cur = id;
        for _ in 0..gen - depth - 1 {
            cur = self.parent(cur).expect("ancestor exists");
        }
        self.alpha(cur)
    }

    fn mrca_depth(x: &UlamLabel, y: &UlamLabel) -> usize {
        x.0.iter().zip(&y.0).take_while(|(a, b)| a == b).count()
    }

    /// `x ≺ y`: `x` lies on the segment from the root to `y`.
    pub fn is_ancestor(&self, x: &TreePoint, y: &TreePoint) -> Result<bool, TreeError> {
        let ix = self.point_node(x)?;
        let iy = self.point_node(y)?;
        if !x.label.is_prefix_of(&y.label) {
            return Ok(false);
        }
        Ok(x.level <= self.exit_level(y, iy, self.generation(ix)))
    }

    /// The most recent common ancestor `x ∧ y`.
    pub fn coalescence_point(&self, x: &TreePoint, y: &TreePoint) -> Result<TreePoint, TreeError> {
        let ix = self.point_node(x)?;
        let iy = self.point_node(y)?;
        let depth = Self::mrca_depth(&x.label, &y.label);
        let level = self
            .exit_level(x, ix, depth)
            .min(self.exit_level(y, iy, depth));
        Ok(TreePoint::new(x.label.truncated(depth), level))
    }

    /// Linear order: the order in which the contour explores the points.
    /// Descendants come before their ancestors, and at a branching point the
    /// part of the parent above the birth level comes before the child's
    /// subtree.
    pub fn linear_compare(&self, x: &TreePoint, y: &TreePoint) -> Result<Ordering, TreeError> {
        let ix = self.point_node(x)?;
        let iy = self.point_node(y)?;
        if x.label == y.label {
            return Ok(y.level.total_cmp(&x.level));
        }
        let depth = Self::mrca_depth(&x.label, &y.label);
        let lx = self.exit_level(x, ix, depth);
        let ly = self.exit_level(y, iy, depth);
        Ok(match ly.total_cmp(&lx) {
            Ordering::Equal => {
                // one of them is the branching point itself, which comes
                // after the subtree of the child born there
                if x.label.generation() == depth {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
            o => o,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> ChronologicalTree {
        crate::chrono_tree::tests::two_individuals()
    }

    fn p(label: &[u32], level: f64) -> TreePoint {
        TreePoint::new(label.to_vec(), level)
    }

    #[test]
    fn ancestor_examples() {
        let t = tree();
        assert!(t.is_ancestor(&p(&[], 2.0), &p(&[], 2.0)).unwrap());
        assert!(t.is_ancestor(&p(&[], 2.0), &p(&[1], 2.5)).unwrap());
        assert!(!t.is_ancestor(&p(&[], 3.0), &p(&[1], 2.5)).unwrap());
        assert!(!t.is_ancestor(&p(&[1], 2.5), &p(&[], 2.0)).unwrap());
        assert!(t.is_ancestor(&p(&[], 0.0), &p(&[1], 3.0)).unwrap());
        assert!(t.is_ancestor(&p(&[], 1.0), &p(&[1], 2.5)).unwrap());
        assert!(t.is_ancestor(&p(&[], 3.0), &p(&[1], 6.0)).is_err());
    }

    #[test]
    fn coalescence_examples() {
        let t = tree();
        assert_eq!(
            t.coalescence_point(&p(&[], 2.5), &p(&[1], 2.5)).unwrap(),
            p(&[], 2.0)
        );
        assert_eq!(
            t.coalescence_point(&p(&[1], 3.0), &p(&[], 1.0)).unwrap(),
            p(&[], 1.0)
        );
        let mut s = ChronologicalTree::new(5.0).unwrap();
        s.push_child(ChronologicalTree::ROOT, 1.0, 4.0).unwrap();
        s.push_child(ChronologicalTree::ROOT, 3.0, 6.0).unwrap();
        assert_eq!(
            s.coalescence_point(&p(&[1], 2.0), &p(&[2], 5.0)).unwrap(),
            p(&[], 1.0)
        );
    }

    #[test]
    fn linear_order_examples() {
        let t = tree();
        let top = p(&[], 5.0);
        let rho = p(&[], 0.0);
        for x in [p(&[], 2.5), p(&[1], 3.0), p(&[1], 2.5), p(&[], 2.0), p(&[], 0.5)] {
            assert_eq!(t.linear_compare(&top, &x).unwrap(), Ordering::Less);
            assert_eq!(t.linear_compare(&x, &rho).unwrap(), Ordering::Less);
        }
        assert_eq!(
            t.linear_compare(&p(&[], 2.5), &p(&[1], 2.5)).unwrap(),
            Ordering::Less
        );
        // segments: descendants first
        assert_eq!(
            t.linear_compare(&p(&[1], 3.0), &p(&[], 2.0)).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            t.linear_compare(&p(&[], 2.0), &p(&[1], 3.0)).unwrap(),
            Ordering::Greater
        );
        assert_eq!(
            t.linear_compare(&p(&[1], 3.0), &p(&[1], 3.0)).unwrap(),
            Ordering::Equal
        );
    }

    #[test]
    fn classify_examples() {
        let single = ChronologicalTree::new(5.0).unwrap();
        assert_eq!(single.classify_point(&p(&[], 5.0)).unwrap(), PointKind::Leaf);
        let t = tree();
        assert_eq!(t.classify_point(&p(&[], 2.0)).unwrap(), PointKind::Branching);
        assert_eq!(t.classify_point(&p(&[], 1.0)).unwrap(), PointKind::Simple);
        assert_eq!(t.classify_point(&p(&[], 0.0)).unwrap(), PointKind::Root);
        assert!(t.classify_point(&p(&[1], 2.0)).is_err());
    }
}
