//! Mobility metrics on a spherical Earth.

use std::collections::HashMap;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use super::config::ExtractionConfig;
use super::stats::median;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocPoint {
    pub time: DateTime<FixedOffset>,
    pub lat: f64,
    pub lon: f64,
}

impl LocPoint {
    pub fn pos(&self) -> LatLon {
        LatLon {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Grid cell of a coordinate after rounding to `decimals` decimal places.
pub fn cell_of(p: LatLon, decimals: u32) -> (i64, i64) {
    let scale = 10f64.powi(decimals as i32);
    ((p.lat * scale).round() as i64, (p.lon * scale).round() as i64)
}

fn centroid(points: &[LatLon]) -> Option<LatLon> {
    if points.is_empty() {
        return None;
    }
    // Offsets from the first point keep repeated coordinates exact.
    let o = points[0];
    let n = points.len() as f64;
    Some(LatLon {
        lat: o.lat + points.iter().map(|p| p.lat - o.lat).sum::<f64>() / n,
        lon: o.lon + points.iter().map(|p| p.lon - o.lon).sum::<f64>() / n,
    })
}

/// Root-mean-square haversine distance from the lat/lon centroid, in meters.
pub fn radius_of_gyration(points: &[LatLon]) -> Option<f64> {
    let c = centroid(points)?;
    let ms = points.iter().map(|&p| haversine_m(p, c).powi(2)).sum::<f64>() / points.len() as f64;
    Some(ms.sqrt())
}

/// Shannon entropy (nats) of the point distribution over grid cells.
pub fn location_entropy(points: &[LatLon], decimals: u32) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let mut counts: HashMap<(i64, i64), usize> = HashMap::new();
    for &p in points {
        *counts.entry(cell_of(p, decimals)).or_default() += 1;
    }
    let n = points.len() as f64;
    let mut counts: Vec<usize> = counts.into_values().collect();
    counts.sort_unstable();
    Some(
        counts
            .into_iter()
            .map(|c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum::<f64>()
            .max(0.0),
    )
}

/// Number of distinct grid cells visited.
pub fn location_count(points: &[LatLon], decimals: u32) -> usize {
    let mut cells: Vec<(i64, i64)> = points.iter().map(|&p| cell_of(p, decimals)).collect();
    cells.sort_unstable();
    cells.dedup();
    cells.len()
}

/// Chronological path length in meters. Points must already be sorted by time.
pub fn path_length(points: &[LatLon]) -> f64 {
    points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Modal cell among `points`, ties resolved by the cell observed first; returns the
/// centroid of that cell's points.
fn modal_cell_centroid(points: &[LocPoint], decimals: u32) -> Option<LatLon> {
    let mut order: Vec<(i64, i64)> = Vec::new();
    let mut members: HashMap<(i64, i64), Vec<LatLon>> = HashMap::new();
    for p in points {
        let c = cell_of(p.pos(), decimals);
        let entry = members.entry(c).or_insert_with(|| {
            order.push(c);
            Vec::new()
        });
        entry.push(p.pos());
    }
    let mut best: Option<(i64, i64)> = None;
    for c in order {
        let n = members[&c].len();
        if best.is_none_or(|b| n > members[&b].len()) {
            best = Some(c);
        }
    }
    best.and_then(|c| centroid(&members[&c]))
}

/// Home location: modal night-time grid cell, falling back to the modal cell
/// over all points. `None` when there are no points at all.
pub fn infer_home(points: &[LocPoint], config: &ExtractionConfig) -> Option<LatLon> {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.time);
    let night: Vec<LocPoint> = sorted
        .iter()
        .copied()
        .filter(|p| config.night_window.contains(p.time.time()))
        .collect();
    modal_cell_centroid(&night, config.grid_decimals)
        .or_else(|| modal_cell_centroid(&sorted, config.grid_decimals))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomeFeatures {
    pub max_dist: f64,
    pub mean_dist: f64,
    pub median_dist: f64,
    pub time_at_home: f64,
    pub night_movement: f64,
}

/// Distances from home and night-time path length. `None` when there is no
/// home or no points.
pub fn home_features(
    points: &[LocPoint],
    home: Option<LatLon>,
    config: &ExtractionConfig,
) -> Option<HomeFeatures> {
    let home = home?;
    if points.is_empty() {
        return None;
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.time);
    let dists: Vec<f64> = sorted.iter().map(|p| haversine_m(p.pos(), home)).collect();
    let at_home = dists.iter().filter(|&&d| d <= config.home_radius_m).count();
    let night: Vec<LatLon> = sorted
        .iter()
        .filter(|p| config.night_window.contains(p.time.time()))
        .map(|p| p.pos())
        .collect();
    Some(HomeFeatures {
        max_dist: dists.iter().copied().fold(0.0, f64::max),
        mean_dist: dists.iter().sum::<f64>() / dists.len() as f64,
        median_dist: median(&dists)?,
        time_at_home: at_home as f64 / dists.len() as f64,
        night_movement: path_length(&night),
    })
}

pub const LOCATION_FEATURES: [&str; 13] = [
    "mean_lat",
    "mean_lon",
    "total_distance",
    "count",
    "max_home_dist",
    "mean_home_dist",
    "median_home_dist",
    "night_movement",
    "radius_of_gyration",
    "sd_lat",
    "sd_lon",
    "entropy",
    "time_at_home",
];

/// The thirteen location features of one day, in [`LOCATION_FEATURES`] order.
pub fn location_day_features(
    points: &[LocPoint],
    home: Option<LatLon>,
    config: &ExtractionConfig,
) -> [Option<f64>; 13] {
    if points.is_empty() {
        return [None; 13];
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.time);
    let pos: Vec<LatLon> = sorted.iter().map(|p| p.pos()).collect();
    let lats: Vec<f64> = pos.iter().map(|p| p.lat).collect();
    let lons: Vec<f64> = pos.iter().map(|p| p.lon).collect();
    let lat = super::stats::stat_block(&lats);
    let lon = super::stats::stat_block(&lons);
    let hf = home_features(&sorted, home, config);
    [
        lat.map(|s| s.mean),
        lon.map(|s| s.mean),
        Some(path_length(&pos)),
        Some(location_count(&pos, config.grid_decimals) as f64),
        hf.map(|h| h.max_dist),
        hf.map(|h| h.mean_dist),
        hf.map(|h| h.median_dist),
        hf.map(|h| h.night_movement),
        radius_of_gyration(&pos),
        lat.map(|s| s.sd),
        lon.map(|s| s.sd),
        location_entropy(&pos, config.grid_decimals),
        hf.map(|h| h.time_at_home),
    ]
}

/// Point `meters` east of `from` along its parallel.
#[cfg(test)]
pub(crate) fn east_of(from: LatLon, meters: f64) -> LatLon {
    let dlon = meters / (EARTH_RADIUS_M * from.lat.to_radians().cos());
    LatLon {
        lat: from.lat,
        lon: from.lon + dlon.to_degrees(),
    }
}
