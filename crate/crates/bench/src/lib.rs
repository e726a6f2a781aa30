//! Fixtures shared by the benchmarks.

use swp_core::datagen::mask_training_rows;
use swp_core::{gen_linear, Dataset, MaskSpec, SynthSpec};

/// Synthetic regression data with `m` rows and `n` features.
pub fn dataset(m: usize, n: usize) -> Dataset {
    gen_linear(&SynthSpec {
        m,
        p: m / 4,
        n,
        seed: 1,
        ..SynthSpec::default()
    })
    .expect("valid synth spec")
}

/// Same data with a cluster-patterned mask on the training rows.
pub fn masked_dataset(m: usize, n: usize, m_rate: f64) -> Dataset {
    mask_training_rows(
        &dataset(m, n),
        &MaskSpec {
            m_rate,
            seed: 2,
            ..MaskSpec::default()
        },
    )
    .expect("valid mask spec")
}
