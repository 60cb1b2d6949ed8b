//! Seeded streams, Ginibre matrices and Haar unitaries.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{qr_factor, ComplexMatrix};

/// Generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// A `(master seed, stream index)` pair. Trial `t` of an experiment uses
/// stream index `t`, so no generator state is shared between trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub seed: u64,
    pub index: u64,
}

impl SeededStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// Complex Gaussian with `E|z|^2 = variance`, independent real and imaginary parts.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// `N x N` matrix of i.i.d. `N_C(0, 1/N)` entries.
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let var = 1.0 / n as f64;
    ComplexMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, var))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` pushed into `Q`, so that the factorization is unique.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    let (q, r) = qr_factor(&g).expect("Ginibre samples are finite and square");
    let phases: Vec<Complex64> = r
        .diagonal()
        .into_iter()
        .map(|d| {
            let m = d.norm();
            if m > 0.0 {
                d / m
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    q.scale_columns(&phases)
}
