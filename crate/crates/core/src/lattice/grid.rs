use crate::error::{BflError, Result};

/// Shape of a uniform one-dimensional lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    /// `nodes` points on a circle of circumference `length`, `x_i = i * length / nodes`.
    Periodic { length: f64, nodes: usize },
    /// `intervals + 1` points `x_i = origin + i * h` cut out of the infinite lattice.
    Window { origin: f64, intervals: usize },
}

/// A uniform lattice with spacing `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    h: f64,
    topology: Topology,
}

impl Grid {
    pub fn periodic(length: f64, nodes: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(BflError::InvalidGrid(format!("period must be positive, got {length}")));
        }
        if nodes < 3 {
            return Err(BflError::InvalidGrid(format!("periodic grid needs at least 3 nodes, got {nodes}")));
        }
        Ok(Self {
            h: length / nodes as f64,
            topology: Topology::Periodic { length, nodes },
        })
    }

    pub fn window(origin: f64, intervals: usize, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(BflError::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if !origin.is_finite() {
            return Err(BflError::InvalidGrid("window origin must be finite".into()));
        }
        if intervals < 4 {
            return Err(BflError::InvalidGrid(format!(
                "window needs at least 4 intervals for third differences, got {intervals}"
            )));
        }
        Ok(Self {
            h,
            topology: Topology::Window { origin, intervals },
        })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.topology, Topology::Periodic { .. })
    }

    /// Number of stored nodes.
    #[inline]
    pub fn len(&self) -> usize {
        match self.topology {
            Topology::Periodic { nodes, .. } => nodes,
            Topology::Window { intervals, .. } => intervals + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the first stored node.
    pub fn start(&self) -> f64 {
        match self.topology {
            Topology::Periodic { .. } => 0.0,
            Topology::Window { origin, .. } => origin,
        }
    }

    /// Period for periodic grids, window width otherwise.
    pub fn extent(&self) -> f64 {
        match self.topology {
            Topology::Periodic { length, .. } => length,
            Topology::Window { intervals, .. } => intervals as f64 * self.h,
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.start() + i as f64 * self.h
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// The grid with twice the resolution on the same domain.
    pub fn refined(&self) -> Self {
        match self.topology {
            Topology::Periodic { length, nodes } => Self {
                h: length / (2 * nodes) as f64,
                topology: Topology::Periodic { length, nodes: 2 * nodes },
            },
            Topology::Window { origin, intervals } => Self {
                h: self.h / 2.0,
                topology: Topology::Window {
                    origin,
                    intervals: 2 * intervals,
                },
            },
        }
    }

    /// Integer `r` such that every `r`-th node of `self` is a node of `coarse`.
    pub fn nesting_ratio(&self, coarse: &Grid) -> Result<usize> {
        let mismatch = || {
            BflError::Alignment(format!("grid {self:?} is not a dyadic refinement of {coarse:?}"))
        };
        let (fine_n, coarse_n) = match (self.topology, coarse.topology) {
            (Topology::Periodic { length: a, nodes: n }, Topology::Periodic { length: b, nodes: m }) => {
                if a != b {
                    return Err(mismatch());
                }
                (n, m)
            }
            (Topology::Window { origin: a, intervals: n }, Topology::Window { origin: b, intervals: m }) => {
                if a != b {
                    return Err(mismatch());
                }
                (n, m)
            }
            _ => return Err(mismatch()),
        };
        if coarse_n == 0 || fine_n % coarse_n != 0 {
            return Err(mismatch());
        }
        let ratio = fine_n / coarse_n;
        if !ratio.is_power_of_two() {
            return Err(mismatch());
        }
        let rel = (self.h * ratio as f64 - coarse.h).abs() / coarse.h;
        if rel > 1e-12 {
            return Err(mismatch());
        }
        Ok(ratio)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(BflError::Alignment(format!("fields live on different grids: {self:?} vs {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_spacing_is_derived_from_period() {
        let g = Grid::periodic(2.0, 8).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.len(), 8);
        assert_eq!(g.x(3), 0.75);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::periodic(1.0, 2).is_err());
        assert!(Grid::periodic(-1.0, 8).is_err());
        assert!(Grid::window(0.0, 3, 0.1).is_err());
        assert!(Grid::window(0.0, 8, 0.0).is_err());
    }

    #[test]
    fn window_coordinates() {
        let g = Grid::window(-1.0, 4, 0.5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.coords(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn nesting() {
        let coarse = Grid::periodic(1.0, 8).unwrap();
        let fine = coarse.refined().refined();
        assert_eq!(fine.nesting_ratio(&coarse).unwrap(), 4);
        let other = Grid::periodic(1.0, 12).unwrap();
        assert!(other.nesting_ratio(&coarse).is_err());
        assert!(coarse.nesting_ratio(&Grid::periodic(2.0, 4).unwrap()).is_err());
    }
}
