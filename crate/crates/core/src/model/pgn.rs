//! Parameter generation: encoder weights as a linear function of a language
//! embedding, `V_L = W_PGN · e_L`.
//!
//! `W_PGN` is stored row-major with one row per flattened encoder parameter
//! and one column per language-embedding dimension.

use super::ModelError;

/// `V_L = W · e` for `W` of shape `rows × e.len()`.
pub fn pgn_params(generator: &[f64], embedding: &[f64]) -> Result<Vec<f64>, ModelError> {
    let cols = embedding.len();
    if cols == 0 || generator.len() % cols != 0 {
        return Err(ModelError::Dimension(format!(
            "generator of length {} is not compatible with a {cols}-dim language embedding",
            generator.len()
        )));
    }
    Ok(generator
        .chunks_exact(cols)
        .map(|row| row.iter().zip(embedding).map(|(w, e)| w * e).sum())
        .collect())
}

/// Adds `dV ⊗ e` to the generator gradient and `Wᵀ dV` to the embedding gradient.
pub fn pgn_backward(
    generator: &[f64],
    embedding: &[f64],
    d_params: &[f64],
    d_generator: &mut [f64],
    d_embedding: &mut [f64],
) {
    let cols = embedding.len();
    for (r, &dv) in d_params.iter().enumerate() {
        if dv == 0.0 {
            continue;
        }
        let row = &generator[r * cols..(r + 1) * cols];
        let d_row = &mut d_generator[r * cols..(r + 1) * cols];
        for c in 0..cols {
            d_row[c] += dv * embedding[c];
            d_embedding[c] += dv * row[c];
        }
    }
}
