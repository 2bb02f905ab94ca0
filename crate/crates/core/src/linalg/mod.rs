//! Sequential dense kernels, the recursive Cholesky-inverse, and the
//! Householder reference factorization.

pub mod gen;
pub mod kernels;
mod matrix;
pub mod oracle;

pub use gen::{gen_test_matrix, standard_normal};
pub use kernels::{
    axpy, chol, cholinv, mm, mm_flops, mm_structured, mm_tn, syrk, syrk_sub, trsm_right_upper,
    FlopCounter, Structure,
};
pub use matrix::DenseMatrix;
pub use oracle::{householder_qr, orthogonality_error, relative_residual, sign_normalize};
