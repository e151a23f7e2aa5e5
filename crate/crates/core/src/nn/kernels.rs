#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let j = i * 4;
        s[0] += a[j] * b[j];
        s[1] += a[j + 1] * b[j + 1];
        s[2] += a[j + 2] * b[j + 2];
        s[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..n {
        tail += a[j] * b[j];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Geometry of a valid (unpadded) square-kernel convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(c: usize, h: usize, w: usize, k: usize, stride: usize) -> Option<Self> {
        if k == 0 || stride == 0 || h < k || w < k {
            return None;
        }
        Some(Self { c, h, w, k, stride, oh: (h - k) / stride + 1, ow: (w - k) / stride + 1 })
    }

    pub fn patch_len(&self) -> usize {
        self.c * self.k * self.k
    }

    pub fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Unfolds one `[C, H, W]` image into `[positions, C*K*K]`.
    pub fn im2col(&self, img: &[f64], cols: &mut [f64]) {
        let pl = self.patch_len();
        for oy in 0..self.oh {
            for ox in 0..self.ow {
                let row = &mut cols[(oy * self.ow + ox) * pl..][..pl];
                let mut t = 0;
                for ch in 0..self.c {
                    let plane = &img[ch * self.h * self.w..];
                    for ky in 0..self.k {
                        let src = (oy * self.stride + ky) * self.w + ox * self.stride;
                        row[t..t + self.k].copy_from_slice(&plane[src..src + self.k]);
                        t += self.k;
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters patch gradients back.
    pub fn col2im(&self, cols: &[f64], img: &mut [f64]) {
        let pl = self.patch_len();
        for oy in 0..self.oh {
            for ox in 0..self.ow {
                let row = &cols[(oy * self.ow + ox) * pl..][..pl];
                let mut t = 0;
                for ch in 0..self.c {
                    let base = ch * self.h * self.w;
                    for ky in 0..self.k {
                        let dst = base + (oy * self.stride + ky) * self.w + ox * self.stride;
                        for kx in 0..self.k {
                            img[dst + kx] += row[t + kx];
                        }
                        t += self.k;
                    }
                }
            }
        }
    }
}
