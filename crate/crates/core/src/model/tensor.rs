use num_complex::Complex64;

/// Symmetric 3×3 real tensor stored as its six independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor3x3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl Tensor3x3 {
    pub const ZERO: Tensor3x3 = Tensor3x3 { xx: 0.0, yy: 0.0, zz: 0.0, xy: 0.0, xz: 0.0, yz: 0.0 };

    pub fn isotropic(s: f64) -> Self {
        Self::diagonal(s, s, s)
    }

    pub fn diagonal(xx: f64, yy: f64, zz: f64) -> Self {
        Self { xx, yy, zz, ..Self::ZERO }
    }

    /// Layout `[xx, yy, zz, xy, xz, yz]`, the order used by the binary grid format.
    pub fn from_array(a: [f64; 6]) -> Self {
        Self { xx: a[0], yy: a[1], zz: a[2], xy: a[3], xz: a[4], yz: a[5] }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    /// Symmetric part of a full matrix.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        Self {
            xx: m[0][0],
            yy: m[1][1],
            zz: m[2][2],
            xy: 0.5 * (m[0][1] + m[1][0]),
            xz: 0.5 * (m[0][2] + m[2][0]),
            yz: 0.5 * (m[1][2] + m[2][1]),
        }
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [[self.xx, self.xy, self.xz], [self.xy, self.yy, self.yz], [self.xz, self.yz, self.zz]]
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        match (p.min(q), p.max(q)) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            (2, 2) => self.zz,
            (0, 1) => self.xy,
            (0, 2) => self.xz,
            (1, 2) => self.yz,
            _ => panic!("tensor index ({p}, {q}) out of range"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn add_isotropic(&self, s: f64) -> Self {
        Self { xx: self.xx + s, yy: self.yy + s, zz: self.zz + s, ..*self }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * s))
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero_within(&self, threshold: f64) -> bool {
        self.to_array().iter().all(|v| v.abs() < threshold)
    }

    /// `R · σ · Rᵀ` for a rotation (or any real) matrix `R`.
    pub fn similarity(&self, r: &[[f64; 3]; 3]) -> Self {
        let s = self.to_matrix();
        let mut rs = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rs[i][j] = (0..3).map(|k| r[i][k] * s[k][j]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| rs[i][k] * r[j][k]).sum();
            }
        }
        Self::from_matrix(&out)
    }

    #[inline]
    pub fn apply(&self, v: [Complex64; 3]) -> [Complex64; 3] {
        [
            v[0] * self.xx + v[1] * self.xy + v[2] * self.xz,
            v[0] * self.xy + v[1] * self.yy + v[2] * self.yz,
            v[0] * self.xz + v[1] * self.yz + v[2] * self.zz,
        ]
    }
}

/// Conductivity tensor of a VTI medium expressed in a frame rotated by the
/// angles `theta` and `phi`: the symmetry axis maps to
/// `(sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn rotate_vti_tensor(sigma_h: f64, sigma_v: f64, theta: f64, phi: f64) -> Tensor3x3 {
    let d = sigma_v - sigma_h;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Tensor3x3 {
        xx: sigma_h + d * st * st * cp * cp,
        xy: d * st * st * sp * cp,
        xz: d * st * ct * cp,
        yy: sigma_h + d * st * st * sp * sp,
        yz: d * st * ct * sp,
        zz: sigma_v - d * st * st,
    }
}
