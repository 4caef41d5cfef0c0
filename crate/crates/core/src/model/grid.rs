//! Midpoint-rule discretization of a kernel on the type interval `[0, 1]`.

use super::{AgeDistribution, ChannelSpec, CountDistribution, ModelError, ModelSpec};

/// Interval-type model: a type-`x` mother has Poisson numbers of children with
/// types distributed by the intensity `scale * density(x, y) dy`.
pub struct IntervalKernel<'a> {
    pub name: String,
    pub density: &'a dyn Fn(f64, f64) -> f64,
    pub scale: f64,
    pub age: AgeDistribution,
}

/// `n` grid types at the cell midpoints; channel `i -> j` has Poisson mean
/// `scale * density(x_i, y_j) / n`. Rows with no mass become absorbing types.
pub fn discretize_interval_model(kernel: &IntervalKernel<'_>, n: usize) -> Result<ModelSpec, ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyTypeSpace);
    }
    kernel.age.validate()?;
    let mid = |i: usize| (i as f64 + 0.5) / n as f64;
    let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut channels = Vec::new();
    let mut absorbing = Vec::new();
    for i in 0..n {
        let mut row_mass = 0.0;
        for j in 0..n {
            let k = (kernel.density)(mid(i), mid(j));
            if !(k.is_finite() && k >= 0.0) {
                return Err(ModelError::NonIntegrableKernel { row: i });
            }
            let mean = kernel.scale * k / n as f64;
            if mean > 0.0 {
                row_mass += mean;
                channels.push(ChannelSpec {
                    parent: labels[i].clone(),
                    child: labels[j].clone(),
                    shared_age: false,
                    count: CountDistribution::Poisson { mean },
                    age: kernel.age,
                });
            }
        }
        if row_mass == 0.0 {
            absorbing.push(labels[i].clone());
        }
    }
    Ok(ModelSpec {
        name: kernel.name.clone(),
        types: labels,
        absorbing,
        channels,
        lifespan: Default::default(),
    })
}
