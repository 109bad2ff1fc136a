/// Piecewise-linear weights `u(y)` placing an age on the integer grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeWeights {
    /// Grid age carrying weight `1 - upper_weight`.
    pub lower: u32,
    /// Weight on `lower + 1`; zero when the age sits on a grid point.
    pub upper_weight: f64,
}

impl AgeWeights {
    /// Non-zero `(grid age, weight)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> {
        let first = (self.lower, 1.0 - self.upper_weight);
        let second = (self.lower + 1, self.upper_weight);
        std::iter::once(first).chain(std::iter::once(second)).filter(|t| t.1 > 0.0)
    }
}

/// Interpolation weights for `age` clamped to `[age_min, age_max]`.
pub fn age_interpolation(age: f64, age_min: u32, age_max: u32) -> AgeWeights {
    let a = age.clamp(age_min as f64, age_max as f64);
    let lower = (a.floor() as u32).min(age_max);
    let frac = a - lower as f64;
    if lower == age_max || frac == 0.0 {
        AgeWeights { lower, upper_weight: 0.0 }
    } else {
        AgeWeights { lower, upper_weight: frac }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(w: AgeWeights) -> Vec<(u32, f64)> {
        w.terms().collect()
    }

    #[test]
    fn grid_point_midpoint_and_clamp() {
        assert_eq!(dense(age_interpolation(25.0, 16, 42)), vec![(25, 1.0)]);
        assert_eq!(dense(age_interpolation(25.5, 16, 42)), vec![(25, 0.5), (26, 0.5)]);
        assert_eq!(dense(age_interpolation(14.3, 16, 42)), vec![(16, 1.0)]);
        assert_eq!(dense(age_interpolation(50.0, 16, 42)), vec![(42, 1.0)]);
    }
}
