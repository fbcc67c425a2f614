//! Splitting trees and their jumping chronological contour processes.

pub mod analysis;
pub mod chrono_tree;
pub mod contour;
pub mod levy_kernel;
pub mod simulate;
