//! Double-double (roughly 32-digit) arithmetic for low-frequency sampling
//! sums.
//!
//! High-order sequences suppress the sampling function like `z^(k+1)` with
//! `k` up to 16, so its value at small `z` sits 20-60 decades below the
//! individual terms of the defining sum. Plain `f64` evaluation loses it to
//! cancellation around 1e-16 of the term magnitude; carrying each term and
//! the accumulator as an unevaluated `hi + lo` pair pushes that floor to
//! roughly 1e-32, which is enough for every slope fit this crate performs.
//!
//! Only the operations the sampling path needs are implemented: add, sub,
//! mul, a few scalar forms, and `sincos` for arguments `|x| <= 2^20`.

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// `a + b` with exact rounding error, assuming nothing about magnitudes.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// `a + b` with exact rounding error, requiring `|a| >= |b|` (or a == 0).
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// `a * b` with exact rounding error via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two `f64` values.
    #[inline]
    pub fn from_prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, other: f64) -> Dd {
        let (s, e) = two_sum(self.hi, other);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, other: f64) -> Dd {
        let (p, e) = two_prod(self.hi, other);
        let e = e + self.lo * other;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    /// Division by an `f64`, one Newton correction past the quotient.
    #[inline]
    pub fn div_f64(self, other: f64) -> Dd {
        let q1 = self.hi / other;
        let (p, e) = two_prod(q1, other);
        let r = ((self.hi - p) - e) + self.lo;
        let q2 = r / other;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    /// Squared magnitude treated as a complex pair helper: `self^2`.
    #[inline]
    pub fn sqr(self) -> Dd {
        self.mul(self)
    }
}

// pi/2 split into three parts; the sum is accurate to ~1e-50 so that
// argument reduction x - k*pi/2 keeps ~32 significant digits for k up
// to ~2^20.
const PIO2_HI: f64 = std::f64::consts::FRAC_PI_2;
const PIO2_MID: f64 = 6.123233995736766e-17;
const PIO2_LO: f64 = -1.4973849048591698e-33;

/// Simultaneous extended-precision sine and cosine.
///
/// Valid for `|x| <= 2^20` (far beyond what the low-frequency paths use).
/// The reduced argument lands in `[-pi/4, pi/4]` and the kernels are plain
/// Taylor series carried in double-double.
pub fn sincos(x: Dd) -> (Dd, Dd) {
    // k = round(x / (pi/2))
    let k = (x.hi / PIO2_HI).round();
    let r = if k == 0.0 {
        x
    } else {
        // x - k*pi/2 using the three-part constant, largest first.
        x.add(Dd::from_prod(-k, PIO2_HI))
            .add(Dd::from_prod(-k, PIO2_MID))
            .add_f64(-k * PIO2_LO)
    };

    let (s, c) = sincos_kernel(r);
    // Quadrant selection from k mod 4.
    let q = ((k as i64) % 4 + 4) % 4;
    match q {
        0 => (s, c),
        1 => (c, s.neg()),
        2 => (s.neg(), c.neg()),
        _ => (c.neg(), s),
    }
}

/// Taylor kernels on `|r| <= pi/4 + small`.
fn sincos_kernel(r: Dd) -> (Dd, Dd) {
    let r2 = r.sqr();

    // sin: r * sum_{n>=0} (-1)^n r^(2n) / (2n+1)!
    let mut term = Dd::ONE;
    let mut sin_sum = Dd::ONE;
    let mut n = 1.0f64;
    for _ in 0..17 {
        term = term.mul(r2).div_f64(-(2.0 * n) * (2.0 * n + 1.0));
        sin_sum = sin_sum.add(term);
        if term.hi.abs() < 1e-35 {
            break;
        }
        n += 1.0;
    }
    let sin = r.mul(sin_sum);

    // cos: sum_{n>=0} (-1)^n r^(2n) / (2n)!
    let mut term = Dd::ONE;
    let mut cos_sum = Dd::ONE;
    let mut n = 1.0f64;
    for _ in 0..17 {
        term = term.mul(r2).div_f64(-(2.0 * n - 1.0) * (2.0 * n));
        cos_sum = cos_sum.add(term);
        if term.hi.abs() < 1e-35 {
            break;
        }
        n += 1.0;
    }
    (sin, cos_sum)
}

/// A complex value carried in double-double components.
#[derive(Copy, Clone, Debug, Default)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub const ZERO: DdComplex = DdComplex { re: Dd::ZERO, im: Dd::ZERO };

    #[inline]
    pub fn add(self, other: DdComplex) -> DdComplex {
        DdComplex { re: self.re.add(other.re), im: self.im.add(other.im) }
    }

    /// `self + w * e^{-i theta}` for real `w`.
    #[inline]
    pub fn add_weighted_cis_neg(self, w: f64, theta: Dd) -> DdComplex {
        let (s, c) = sincos(theta);
        DdComplex {
            re: self.re.add(c.mul_f64(w)),
            im: self.im.add(s.mul_f64(-w)),
        }
    }

    /// Squared magnitude, rounded to `f64` at the end.
    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re.sqr().add(self.im.sqr()).to_f64()
    }

    #[inline]
    pub fn to_complex64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (argument, function, hi, lo) frozen from a 50-digit evaluation.
    const SINCOS_REFS: &[(f64, &str, f64, f64)] = &[
        (0.5, "sin", 0.479425538604203, -5.103969860556013e-18),
        (0.5, "cos", 0.8775825618903728, -4.2623149864279997e-17),
        (1.0, "sin", 0.8414709848078965, 1.776845092935536e-18),
        (1.0, "cos", 0.5403023058681398, -4.760954612604417e-17),
        (3.0, "sin", 0.1411200080598672, 8.577269787017502e-18),
        (3.0, "cos", -0.9899924966004454, -4.2060261566099734e-17),
        (7.25, "sin", 0.8230808790115055, -4.782695371371335e-17),
        (7.25, "cos", 0.5679241732886948, 4.202033681904503e-17),
        (13.37109375, "sin", 0.7206387175764, 2.0489432623879023e-17),
        (13.37109375, "cos", 0.6933107807685105, -2.9333256570349392e-18),
        (42.0, "sin", -0.9165215479156338, -2.899866144345797e-18),
        (42.0, "cos", -0.39998531498835127, -2.3550342014202576e-17),
        (97.625, "sin", -0.23345342450006654, 5.036936812622597e-18),
        (97.625, "cos", -0.9723679851728931, -6.763572404740656e-18),
        (1000.25, "sin", 0.9403086681560692, 1.4407313570827165e-17),
        (1000.25, "cos", 0.3403228005740423, -5.0932585901266465e-18),
        (0.0009765625, "sin", 0.0009765623447795783, -7.228182545327179e-21),
        (0.0009765625, "cos", 0.9999995231628797, 3.700622948511186e-17),
    ];

    #[test]
    fn sincos_matches_50_digit_references() {
        for &(x, which, hi, lo) in SINCOS_REFS {
            let (s, c) = sincos(Dd::from_f64(x));
            let got = if which == "sin" { s } else { c };
            // Compare against the two-part reference with ~1e-31 slack.
            let diff = got.add(Dd { hi: -hi, lo: -lo });
            assert!(
                diff.to_f64().abs() < 2e-31,
                "{which}({x}) off by {:e}",
                diff.to_f64()
            );
        }
    }

    #[test]
    fn sincos_agrees_with_f64_everywhere() {
        let mut x = 0.017;
        while x < 500.0 {
            let (s, c) = sincos(Dd::from_f64(x));
            assert!((s.hi - x.sin()).abs() < 1e-14, "sin({x})");
            assert!((c.hi - x.cos()).abs() < 1e-14, "cos({x})");
            x *= 1.37;
            x += 0.11;
        }
    }

    #[test]
    fn arithmetic_identities() {
        let a = Dd::from_prod(1.0 / 3.0, 1.0 / 7.0);
        let b = Dd::from_f64(2.5);
        let s = a.add(b).sub(b);
        assert!((s.to_f64() - a.to_f64()).abs() < 1e-30);
        let p = a.mul(b).div_f64(2.5);
        assert!((p.hi - a.hi).abs() < 1e-25);

        // Cancellation that f64 cannot represent: (1 + 1e-20) - 1.
        let tiny = Dd::ONE.add_f64(1e-20).add_f64(-1.0);
        assert!((tiny.to_f64() - 1e-20).abs() < 1e-33);
    }

    #[test]
    fn pythagorean_identity_in_dd() {
        for &x in &[0.3, 2.0, 11.0, 200.5] {
            let (s, c) = sincos(Dd::from_f64(x));
            let one = s.sqr().add(c.sqr());
            assert!((one.to_f64() - 1.0).abs() < 1e-30, "s^2+c^2 at {x}");
        }
    }
}
