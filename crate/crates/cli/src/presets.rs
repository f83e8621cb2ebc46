//! Built-in campaign specs.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: [Preset; 6] = [
    Preset {
        name: "fig1a",
        description: "uplink IoT versus aerial UE share (UMa-AV)",
        text: include_str!("../presets/fig1a.toml"),
    },
    Preset {
        name: "fig1b",
        description: "downlink geometry of aerial and terrestrial UEs at 25% aerial share",
        text: include_str!("../presets/fig1b.toml"),
    },
    Preset {
        name: "fig3",
        description: "multi-cell A4 report for a 200 m, 150 km/h flight",
        text: include_str!("../presets/fig3.toml"),
    },
    Preset {
        name: "fig4",
        description: "height-threshold reports for ascending, descending and level UEs",
        text: include_str!("../presets/fig4.toml"),
    },
    Preset {
        name: "fig5",
        description: "terrestrial uplink throughput under per-class pathloss compensation",
        text: include_str!("../presets/fig5.toml"),
    },
    Preset {
        name: "mobility",
        description: "handover and radio-link failures, aerial versus terrestrial",
        text: include_str!("../presets/mobility.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
