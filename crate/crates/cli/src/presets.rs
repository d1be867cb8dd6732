//! Built-in configs, reduced in size so each finishes in minutes.

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    /// `(subdirectory, config)`; single-part presets write straight into the
    /// output directory.
    pub parts: &'static [(&'static str, &'static str)],
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "kappa-vs-alpha",
        about: "thermalization κ against the angular exponent α (2D)",
        parts: &[("", include_str!("../presets/kappa_vs_alpha.toml"))],
    },
    Preset {
        name: "eta-scan",
        about: "particle-simulation PSD gain against η for three angular laws (2D)",
        parts: &[("", include_str!("../presets/eta_scan.toml"))],
    },
    Preset {
        name: "trajectories",
        about: "evaporation trajectories near the best η of two laws (2D)",
        parts: &[("", include_str!("../presets/trajectories.toml"))],
    },
    Preset {
        name: "tb-eta-scan",
        about: "truncated-Boltzmann PSD gain against η in 2D and 3D",
        parts: &[("", include_str!("../presets/tb_eta_scan.toml"))],
    },
    Preset {
        name: "antievap",
        about: "reactive loss without evaporation: heating and energy per loss (2D)",
        parts: &[("", include_str!("../presets/antievap.toml"))],
    },
    Preset {
        name: "multiband",
        about: "lattice master equation with one, two and three axial bands",
        parts: &[
            ("bands_1", include_str!("../presets/multiband_1.toml")),
            ("bands_2", include_str!("../presets/multiband_2.toml")),
            ("bands_3", include_str!("../presets/multiband_3.toml")),
        ],
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
