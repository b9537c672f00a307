use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Continuous power law with density proportional to `x^-alpha` on
/// `[lower, upper]`, sampled by inverting its CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPowerLaw {
    lower: f64,
    upper: f64,
    alpha: f64,
}

impl TruncatedPowerLaw {
    pub fn new(lower: f64, upper: f64, alpha: f64) -> Self {
        assert!(lower > 0.0 && lower <= upper, "need 0 < lower <= upper");
        assert!(alpha.is_finite(), "alpha must be finite");
        TruncatedPowerLaw { lower, upper, alpha }
    }

    /// Maps a uniform `u` in `[0, 1)` to a sample.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = (self.lower, self.upper);
        if a == b || u <= 0.0 {
            return a;
        }
        let x = if (self.alpha - 1.0).abs() < 1e-12 {
            a * (b / a).powf(u)
        } else {
            let e = 1.0 - self.alpha;
            let (lo, hi) = (a.powf(e), b.powf(e));
            (lo + u * (hi - lo)).powf(1.0 / e)
        };
        x.clamp(a, b)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = (self.lower, self.upper);
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        if (self.alpha - 1.0).abs() < 1e-12 {
            (x / a).ln() / (b / a).ln()
        } else {
            let e = 1.0 - self.alpha;
            (x.powf(e) - a.powf(e)) / (b.powf(e) - a.powf(e))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Rounds half away from zero for non-negative values (`2.5 -> 3`).
pub(crate) fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Generation phases, each drawing from its own ChaCha20 stream so that
/// adding draws to one phase never shifts another.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Phase {
    Sizes = 1,
    Membership = 2,
    TimeShare = 3,
    Infection = 4,
    Cost = 5,
}

pub(crate) fn stream(seed: u64, phase: Phase) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(phase as u64);
    rng
}
