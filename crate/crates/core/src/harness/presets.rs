use super::config::{parse_config, ExperimentConfig};

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &["fig1a", "fig1b", "fig2", "fig3a", "fig3b", "table1"];

/// Config text reproducing one of the published experiments.
pub fn preset_text(name: &str) -> Option<String> {
    let body = match name {
        "fig1a" | "fig1b" => {
            "scenario = underlay\nmode = ee, rate\nalgorithm = alg1\nr_percent = 50, 75, 100\np1_dbw = -10\n"
        }
        "fig2" => "scenario = underlay\nmode = ee, rate\nalgorithm = alg1\nr_percent = 75\np1_dbw = -10\n",
        "fig3a" | "fig3b" => "scenario = overlay\nmode = ee, rate\nalgorithm = alg2, alg3\nr_percent = 125\np1_dbw = -20\n",
        "table1" => "scenario = overlay\nmode = ee\nalgorithm = alg2, alg3\nr_percent = 125, 200\np1_dbw = -20\n",
        _ => return None,
    };
    let what = match name {
        "fig1a" => "mean secondary energy efficiency vs P2",
        "fig1b" => "mean secondary rate vs P2",
        "fig2" => "mean secondary transmit power vs P2",
        "fig3a" => "overlay mean energy efficiency vs P2",
        "fig3b" => "overlay mean secondary rate vs P2",
        _ => "overlay mean iteration counts vs P2",
    };
    Some(format!(
        "# {name}: {what}\nname = {name}\n{body}pc_w = 1\nalpha = 10\nn_t1 = 2\nn_t2 = 2\nn_r = 2\n\
         bandwidth_hz = 180000\nn0_dbm_per_hz = -174\nnoise_figure_db = 3\nr2_star_bps = 0\n\
         p2_dbw = -30:-2:4\nn_drops = 1000\nseed = 0\neps = 1e-3\noutput = {name}.csv\n"
    ))
}

pub fn preset(name: &str) -> Option<Vec<ExperimentConfig>> {
    preset_text(name).map(|t| parse_config(&t).expect("presets are valid"))
}
