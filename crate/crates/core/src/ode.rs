//! Fixed-step classical Runge-Kutta integration over flat state arrays.

/// Advances `y` by one classical RK4 step of size `dt` for the autonomous
/// system `dy/dt = f(y)`.
pub fn rk4_step<const N: usize, F>(y: &[f64; N], dt: f64, mut f: F) -> [f64; N]
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * dt, &k1));
    let k3 = f(&axpy(y, 0.5 * dt, &k2));
    let k4 = f(&axpy(y, dt, &k3));

    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, x: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for (o, xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
    out
}
