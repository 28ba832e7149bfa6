use super::ContactError;

/// `(|τy| / fz, |τx| / fz)` for a plane wrench `(τx, τy, τz, fx, fy, fz)`.
pub fn cop_of_wrench(wrench: &[f64; 6]) -> Result<(f64, f64), ContactError> {
    let fz = wrench[5];
    if fz <= 0.0 {
        return Err(ContactError::NonPositiveNormal(fz));
    }
    Ok((wrench[1].abs() / fz, wrench[0].abs() / fz))
}

/// `max(|fx|, |fy|) / fz` from the force part `(fx, fy, fz)`.
pub fn friction_ratio(force: &[f64; 3]) -> Result<f64, ContactError> {
    let fz = force[2];
    if fz <= 0.0 {
        return Err(ContactError::NonPositiveNormal(fz));
    }
    Ok(force[0].abs().max(force[1].abs()) / fz)
}
