//! Axis sets of the five standard sweeps. Node and detection
//! parameters come from the config, which defaults to the default
//! operating point (ε = 8, Ω = −ω_B, η = 1, T = 1/2, ω_sw = 0).

use becbell::sweep::{Axis, Knob, Output};
use clap::ValueEnum;

use crate::config::SweepSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Discord over (ε₁, ε₂) ∈ [0.5, 30]², 50×50.
    Fig2,
    /// Discord against detector efficiency 1.0 → 0.2, 9 points.
    Fig3,
    /// Discord over (Ω₁/ω_B, Ω₂/ω_B) ∈ [−2, 0]², 25×25.
    Fig4,
    /// Discord against ω_sw/ω_R ∈ [0, 20], 20 points.
    Fig5,
    /// Logarithmic negativity on the (ε₁, ε₂) grid.
    Fig6,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }

    pub fn settings(self) -> SweepSettings {
        let axis = |knob, min, max, count| Axis {
            knob,
            min,
            max,
            count,
        };
        let both = vec![Output::Discord, Output::LogNegativity];
        let (axes, outputs) = match self {
            Preset::Fig2 => (
                vec![
                    axis(Knob::Epsilon1, 0.5, 30.0, 50),
                    axis(Knob::Epsilon2, 0.5, 30.0, 50),
                ],
                both,
            ),
            Preset::Fig3 => (vec![axis(Knob::Efficiency, 1.0, 0.2, 9)], both),
            Preset::Fig4 => (
                vec![
                    axis(Knob::Center1, -2.0, 0.0, 25),
                    axis(Knob::Center2, -2.0, 0.0, 25),
                ],
                both,
            ),
            Preset::Fig5 => (vec![axis(Knob::CollisionRatio, 0.0, 20.0, 20)], both),
            Preset::Fig6 => (
                vec![
                    axis(Knob::Epsilon1, 0.5, 30.0, 50),
                    axis(Knob::Epsilon2, 0.5, 30.0, 50),
                ],
                vec![Output::LogNegativity, Output::Discord],
            ),
        };
        SweepSettings { axes, outputs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_sweeps() {
        for p in Preset::ALL {
            let s = p.settings();
            for a in &s.axes {
                a.check().unwrap();
            }
        }
        assert_eq!(
            Preset::Fig2
                .settings()
                .axes
                .iter()
                .map(|a| a.count)
                .product::<usize>(),
            2500
        );
    }
}
