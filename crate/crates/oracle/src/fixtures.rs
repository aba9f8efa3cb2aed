//! Seeded random step problems shared by the cross-check tests.

use ch_inpaint::step::StepProblem;
use ch_inpaint::{FidelityField, Grayscale8Image, GridSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Owned data for one random obstacle step.
#[derive(Clone, Debug)]
pub struct RandomStep {
    pub u_prev: ScalarField,
    pub image: ScalarField,
    pub fidelity: FidelityField,
    pub eps: f64,
    pub tau: f64,
}

impl RandomStep {
    /// Feasible `u_prev` (uniform in `[-1, 1]` with some nodes pinned to
    /// `+-1`), a random `+-1` image and a random damaged set.
    pub fn generate(seed: u64, nx: usize, ny: usize, alpha: f64, eps: f64, tau: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(nx, ny).expect("valid grid");
        let u_prev = ScalarField::from_fn(grid, |_, _| match rng.gen_range(0..5) {
            0 => 1.0,
            1 => -1.0,
            _ => rng.gen_range(-1.0..=1.0),
        });
        let image = ScalarField::from_fn(grid, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let n = grid.len();
        let mut damaged: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        // keep the damaged set proper
        damaged[0] = true;
        damaged[n - 1] = false;
        let fidelity = FidelityField::from_damage(grid, &damaged, alpha).expect("proper damage");
        Self {
            u_prev,
            image,
            fidelity,
            eps,
            tau,
        }
    }

    pub fn problem(&self) -> StepProblem<'_> {
        StepProblem::new(
            &self.u_prev,
            &self.image,
            &self.fidelity,
            self.eps,
            self.tau,
        )
        .expect("valid problem")
    }
}

/// Vertical edge: left half black, right half white, with a centred damaged
/// square covering 20% of the image. Returns `(image, mask)`.
pub fn stripe(n: usize) -> (Grayscale8Image, Grayscale8Image) {
    let image =
        Grayscale8Image::from_fn(n, n, |x, _| if x < n / 2 { 0 } else { 255 }).expect("n >= 1");
    let side = (0.2 * (n * n) as f64).sqrt().round() as usize;
    let lo = (n - side) / 2;
    let inside = |v: usize| v >= lo && v < lo + side;
    let mask = Grayscale8Image::from_fn(n, n, |x, y| if inside(x) && inside(y) { 255 } else { 0 })
        .expect("n >= 1");
    (image, mask)
}

/// Gray levels of the four quadrants, row-major.
pub const QUADRANT_LEVELS: [u8; 4] = [40, 100, 170, 230];

/// Four constant quadrants with a cross-shaped damaged band of width
/// `2 * half_width - 1` over the quadrant boundaries.
pub fn quadrants(n: usize, half_width: usize) -> (Grayscale8Image, Grayscale8Image) {
    let c = n / 2;
    let image = Grayscale8Image::from_fn(n, n, |x, y| {
        QUADRANT_LEVELS[(x >= c) as usize + 2 * (y >= c) as usize]
    })
    .expect("n >= 1");
    let near = |v: usize| v.abs_diff(c) < half_width;
    let mask = Grayscale8Image::from_fn(n, n, |x, y| if near(x) || near(y) { 255 } else { 0 })
        .expect("n >= 1");
    (image, mask)
}
