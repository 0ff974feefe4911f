//! Small numerical kernels shared by the diffeomorphism calculus.

/// Six-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152_1,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152_1,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691_0,
    0.467_913_934_572_691_0,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

/// `∫_a^b f` by six-point Gauss–Legendre.
#[inline]
pub fn gauss_legendre<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Uniform grid point `k / (g - 1)`.
#[inline]
pub fn grid_point(k: usize, g: usize) -> f64 {
    if k + 1 == g {
        1.0
    } else {
        k as f64 / (g - 1) as f64
    }
}

/// Deterministic low-discrepancy probe points in the open interval (0,1).
pub fn probe_points(count: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (1..=count)
        .map(|k| {
            let x = (0.5 + k as f64 * GOLDEN).fract();
            x.clamp(1e-6, 1.0 - 1e-6)
        })
        .collect()
}
