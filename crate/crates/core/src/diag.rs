//! Non-fatal conditions that end up in a run manifest.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The last eigenvector component was too small to fix the phase; the
    /// largest-magnitude component was used instead.
    GaugeFallback { k: f64, band: usize, component: usize },
    /// Two bands closer than the degeneracy threshold at this k.
    Degeneracy { k: f64, lower: usize, upper: usize, gap: f64 },
    /// Gaussian envelope is still appreciable at the zone edge.
    WideEnvelope { k_width: f64, edge_ratio: f64 },
    /// A wave packet came closer to an open edge than the configured margin.
    EdgeProximity { time: f64, edge_weight: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::GaugeFallback { k, band, component } => write!(
                f,
                "gauge fallback at k={k:.6}, band {band}: used component {component}"
            ),
            Warning::Degeneracy { k, lower, upper, gap } => {
                write!(f, "bands {lower}/{upper} degenerate at k={k:.6} (gap {gap:.2e})")
            }
            Warning::WideEnvelope { k_width, edge_ratio } => write!(
                f,
                "envelope k_w={k_width:.4} leaves {edge_ratio:.2e} of its peak at the zone edge"
            ),
            Warning::EdgeProximity { time, edge_weight } => {
                write!(f, "packet weight {edge_weight:.2e} near open edge at t={time}")
            }
        }
    }
}
