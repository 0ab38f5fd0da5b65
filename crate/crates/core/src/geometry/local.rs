use super::{Chart, Point2, ScalarField, CRITICAL_GRADIENT};
use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_ORDER};

/// Metric and field jets at one point, with the intrinsic quantities built
/// from them. Every method returns a jet whose order drops by the number of
/// derivatives it consumes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Local {
    pub p: Point2,
    pub e: Jet,
    pub g: Jet,
    pub u: Jet,
}

impl Local {
    pub fn new(chart: &Chart, u: &dyn ScalarField, p: Point2) -> Result<Self> {
        Self::with_order(chart, u, p, MAX_ORDER)
    }

    pub fn with_order(chart: &Chart, u: &dyn ScalarField, p: Point2, order: usize) -> Result<Self> {
        let (e, g) = chart.metric_jets(p, order)?;
        let u = u.jet_to(p, order)?;
        Ok(Self { p, e, g, u })
    }

    /// Metric only; `u` is set to zero.
    pub fn metric(chart: &Chart, p: Point2, order: usize) -> Result<Self> {
        let (e, g) = chart.metric_jets(p, order)?;
        Ok(Self {
            p,
            e,
            g,
            u: Jet::constant(0.0).truncate(order),
        })
    }

    pub fn sqrt_det(&self) -> Jet {
        (self.e * self.g).sqrt()
    }

    /// `|grad f|_g^2` for a jet `f`.
    pub fn grad_norm2_of(&self, f: &Jet) -> Jet {
        let fx = f.dx();
        let fy = f.dy();
        fx * fx / self.e + fy * fy / self.g
    }

    pub fn grad_norm2(&self) -> Jet {
        self.grad_norm2_of(&self.u)
    }

    /// `g(grad a, grad b)` from covector components.
    pub fn inner(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * b[0] / self.e.value() + a[1] * b[1] / self.g.value()
    }

    /// `|grad_0 u|`.
    pub fn euclidean_gradient_norm(&self) -> f64 {
        let [ux, uy] = self.u.gradient();
        ux.hypot(uy)
    }

    pub fn require_regular(&self) -> Result<()> {
        let norm = self.euclidean_gradient_norm();
        if !(norm >= CRITICAL_GRADIENT) {
            return Err(Error::ZeroGradient { point: self.p, norm });
        }
        Ok(())
    }

    /// Laplace-Beltrami operator
    /// `(EG)^{-1/2} [ d_x (sqrt(G/E) f_x) + d_y (sqrt(E/G) f_y) ]`.
    pub fn laplacian(&self, f: &Jet) -> Jet {
        let order = f.order();
        let e = self.e.truncate(order);
        let g = self.g.truncate(order);
        let ratio = (g / e).sqrt();
        let flux_x = ratio * f.dx();
        let flux_y = ratio.recip() * f.dy();
        (flux_x.dx() + flux_y.dy()) / (e * g).sqrt().truncate(order - 2)
    }

    /// Divergence of the vector field with contravariant components `(vx, vy)`.
    pub fn divergence(&self, vx: &Jet, vy: &Jet) -> Jet {
        let order = vx.order().min(vy.order());
        let s = self.sqrt_det().truncate(order);
        ((s * *vx).dx() + (s * *vy).dy()) / s.truncate(order - 1)
    }

    /// Gaussian curvature
    /// `-(EG)^{-1/2}/2 [ d_x(G_x / sqrt(EG)) + d_y(E_y / sqrt(EG)) ]`.
    pub fn gauss_curvature(&self) -> Jet {
        let s = self.sqrt_det();
        let a = (self.g.dx() / s.truncate(self.g.order() - 1)).dx();
        let b = (self.e.dy() / s.truncate(self.e.order() - 1)).dy();
        let s2 = s.truncate(a.order());
        -(a + b) / (s2 * 2.0)
    }

    /// `[G^x_xx, G^x_xy, G^x_yy, G^y_xx, G^y_xy, G^y_yy]` at the point.
    pub fn christoffels(&self) -> [f64; 6] {
        let e = self.e.value();
        let g = self.g.value();
        let [ex, ey] = self.e.gradient();
        let [gx, gy] = self.g.gradient();
        [
            ex / (2.0 * e),
            ey / (2.0 * e),
            -gx / (2.0 * e),
            -ey / (2.0 * g),
            gx / (2.0 * g),
            gy / (2.0 * g),
        ]
    }

    /// Covariant Hessian `[H_xx, H_xy, H_yy]` of `u`.
    pub fn covariant_hessian(&self) -> [f64; 3] {
        let [ux, uy] = self.u.gradient();
        let [uxx, uxy, uyy] = self.u.hessian();
        let c = self.christoffels();
        [
            uxx - c[0] * ux - c[3] * uy,
            uxy - c[1] * ux - c[4] * uy,
            uyy - c[2] * ux - c[5] * uy,
        ]
    }

    /// `|nabla^2 u|_g^2`.
    pub fn hessian_norm2(&self) -> f64 {
        let [hxx, hxy, hyy] = self.covariant_hessian();
        let e = self.e.value();
        let g = self.g.value();
        hxx * hxx / (e * e) + 2.0 * hxy * hxy / (e * g) + hyy * hyy / (g * g)
    }

    /// Contravariant components of `grad u / |grad u|`.
    pub fn unit_normal(&self) -> (Jet, Jet) {
        let n = self.grad_norm2().sqrt();
        let order = n.order();
        let ux = self.u.dx();
        let uy = self.u.dy();
        let e = self.e.truncate(order);
        let g = self.g.truncate(order);
        (ux / (e * n), uy / (g * n))
    }

    /// Contravariant components of `(u_2, -u_1) / |grad u|` in the orthonormal
    /// frame `(d_x / sqrt E, d_y / sqrt G)`; this is `-*grad u / |grad u|`.
    pub fn unit_rotated(&self) -> (Jet, Jet) {
        let n = self.grad_norm2().sqrt();
        let order = n.order();
        let s = self.sqrt_det().truncate(order);
        let ux = self.u.dx();
        let uy = self.u.dy();
        (uy / (s * n), -ux / (s * n))
    }

    /// Geodesic curvature of the level curves, `k = -div(grad u / |grad u|)`.
    pub fn level_curvature(&self) -> Jet {
        let (vx, vy) = self.unit_normal();
        -self.divergence(&vx, &vy)
    }

    /// Curvature of the steepest-descent lines,
    /// `h = -div((u_2, -u_1) / |grad u|) = div(*grad u / |grad u|)`.
    pub fn steepest_descent_curvature(&self) -> Jet {
        let (vx, vy) = self.unit_rotated();
        -self.divergence(&vx, &vy)
    }

    /// Covector `(K_x, K_y)` paired with the contravariant vector `(vx, vy)`.
    pub fn pair(covector: [f64; 2], vector: [f64; 2]) -> f64 {
        covector[0] * vector[0] + covector[1] * vector[1]
    }

    /// Contravariant components of `grad u`.
    #[cfg(test)]
    pub fn grad_vector(&self) -> [f64; 2] {
        let [ux, uy] = self.u.gradient();
        [ux / self.e.value(), uy / self.g.value()]
    }

    /// Contravariant components of `*grad u`, the quarter turn of `grad u`
    /// with frame components `(-u_2, u_1)`.
    pub fn star_grad_vector(&self) -> [f64; 2] {
        let [ux, uy] = self.u.gradient();
        let s = (self.e.value() * self.g.value()).sqrt();
        [-uy / s, ux / s]
    }
}
