//! Bounded moving-average smoothing of the yaw, sideward and vertical channels.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::RelativeState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub window: usize,
    /// Maximum admitted deviation from the window mean, radians.
    pub yaw_bound: f64,
    pub x_bound: f64,
    pub y_bound: f64,
    /// After this many consecutive rejections the channel is re-seeded from
    /// the raw sample, so a real maneuver cannot lock the output on a stale
    /// mean. Zero disables re-seeding.
    pub max_consecutive_rejects: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { window: 10, yaw_bound: 5f64.to_radians(), x_bound: 0.25, y_bound: 0.25, max_consecutive_rejects: 5 }
    }
}

impl FilterConfig {
    /// Longer window used on the real vehicle.
    pub fn flight() -> Self {
        Self { window: 40, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Channel {
    bound: f64,
    history: VecDeque<f64>,
    rejects: usize,
    reseeded: bool,
}

impl Channel {
    fn new(bound: f64) -> Self {
        Self { bound, history: VecDeque::new(), rejects: 0, reseeded: false }
    }

    fn mean(&self) -> f64 {
        self.history.iter().sum::<f64>() / self.history.len() as f64
    }

    fn update(&mut self, raw: f64, window: usize, max_rejects: usize) -> f64 {
        self.reseeded = false;
        if self.history.len() < window {
            self.history.push_back(raw);
            return raw;
        }
        let mean = self.mean();
        let admitted = if (raw - mean).abs() > self.bound {
            self.rejects += 1;
            if max_rejects > 0 && self.rejects > max_rejects {
                self.rejects = 0;
                self.reseeded = true;
                self.history.iter_mut().for_each(|v| *v = raw);
                return raw;
            }
            mean
        } else {
            self.rejects = 0;
            raw
        };
        self.history.pop_front();
        self.history.push_back(admitted);
        self.mean()
    }
}

/// Pass-through until `window` samples have accumulated; afterwards samples
/// farther than the bound from the running mean are replaced by the mean and
/// the window mean is reported. Forward distance is never filtered.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingAverageFilter {
    window: usize,
    max_rejects: usize,
    yaw: Channel,
    x: Channel,
    y: Channel,
}

impl MovingAverageFilter {
    pub fn new(cfg: &FilterConfig) -> Self {
        assert!(cfg.window >= 1, "filter window must be positive");
        assert!(cfg.yaw_bound > 0.0 && cfg.x_bound > 0.0 && cfg.y_bound > 0.0, "filter bounds must be positive");
        Self { window: cfg.window, max_rejects: cfg.max_consecutive_rejects, yaw: Channel::new(cfg.yaw_bound), x: Channel::new(cfg.x_bound), y: Channel::new(cfg.y_bound) }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// True once the history is full and rejection is in effect.
    pub fn active(&self) -> bool {
        self.yaw.history.len() >= self.window
    }

    pub fn len(&self) -> usize {
        self.yaw.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yaw.history.is_empty()
    }

    /// True when the last update re-seeded any channel, so its output jumped.
    pub fn reseeded(&self) -> bool {
        self.yaw.reseeded || self.x.reseeded || self.y.reseeded
    }

    pub fn reset(&mut self) {
        self.yaw.history.clear();
        self.x.history.clear();
        self.y.history.clear();
        self.yaw.rejects = 0;
        self.x.rejects = 0;
        self.y.rejects = 0;
        for c in [&mut self.yaw, &mut self.x, &mut self.y] {
            c.reseeded = false;
        }
    }

    pub fn update(&mut self, raw: &RelativeState) -> RelativeState {
        debug_assert!(raw.fresh, "only fresh estimates enter the filter");
        RelativeState {
            yaw: self.yaw.update(raw.yaw, self.window, self.max_rejects),
            x_side: self.x.update(raw.x_side, self.window, self.max_rejects),
            y_vert: self.y.update(raw.y_vert, self.window, self.max_rejects),
            ..*raw
        }
    }
}

/// Free-function form of [`MovingAverageFilter::update`].
pub fn moving_average_update(filter: &mut MovingAverageFilter, raw: &RelativeState) -> RelativeState {
    filter.update(raw)
}
