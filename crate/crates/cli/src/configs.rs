use knockagg::simlab::ConfigFile;

use crate::CliError;

pub struct Bundled {
    pub name: &'static str,
    pub full_scale: bool,
    pub json: &'static str,
}

pub const BUNDLED: &[Bundled] = &[
    Bundled {
        name: "fig1_iid_small",
        full_scale: false,
        json: include_str!("../configs/fig1_iid_small.json"),
    },
    Bundled {
        name: "fig1_amplitude_small",
        full_scale: false,
        json: include_str!("../configs/fig1_amplitude_small.json"),
    },
    Bundled {
        name: "table1_small",
        full_scale: false,
        json: include_str!("../configs/table1_small.json"),
    },
    Bundled {
        name: "section4_recovery",
        full_scale: false,
        json: include_str!("../configs/section4_recovery.json"),
    },
    Bundled {
        name: "fig1_iid_full",
        full_scale: true,
        json: include_str!("../configs/fig1_iid_full.json"),
    },
    Bundled {
        name: "fig1_amplitude_full",
        full_scale: true,
        json: include_str!("../configs/fig1_amplitude_full.json"),
    },
    Bundled {
        name: "table1_full",
        full_scale: true,
        json: include_str!("../configs/table1_full.json"),
    },
];

pub fn parse_config(text: &str, source: &str) -> Result<ConfigFile, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{source}: {e}")))
}

pub fn bundled(name: &str, full_scale: bool) -> Result<ConfigFile, CliError> {
    let b = BUNDLED.iter().find(|b| b.name == name).ok_or_else(|| {
        let names: Vec<_> = BUNDLED.iter().map(|b| b.name).collect();
        CliError::Validation(format!("no bundled config {name:?}; available: {}", names.join(", ")))
    })?;
    if b.full_scale && !full_scale {
        return Err(CliError::Validation(format!(
            "{name} runs at full scale and takes hours; pass --full-scale to run it"
        )));
    }
    parse_config(b.json, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_config_parses_and_validates() {
        for b in BUNDLED {
            match parse_config(b.json, b.name).unwrap() {
                ConfigFile::Fdr(c) => c.validate().unwrap(),
                ConfigFile::Recovery(c) => c.validate().unwrap(),
            }
        }
        assert!(bundled("table1_full", false).is_err());
        assert!(bundled("table1_full", true).is_ok());
        assert!(bundled("nope", true).is_err());
    }
}
