//! Aerial-UE identification and the flight-path information exchange.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::mobility::FlightPath;
use crate::UeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationPolicy {
    /// Aerial subscription and aerial radio capability are both required.
    #[default]
    And,
    SubscriptionOnly,
    CapabilityOnly,
}

pub fn identify_aerial(subscription_authorized: bool, capability_indicated: bool, policy: IdentificationPolicy) -> bool {
    match policy {
        IdentificationPolicy::And => subscription_authorized && capability_indicated,
        IdentificationPolicy::SubscriptionOnly => subscription_authorized,
        IdentificationPolicy::CapabilityOnly => capability_indicated,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeContext {
    pub ue_id: UeId,
    pub flight_path_available: bool,
    pub subscription_aerial_authorized: bool,
    pub radio_capability_aerial: bool,
    pub identified_aerial: bool,
}

impl UeContext {
    pub fn new(ue_id: UeId, subscription: bool, capability: bool, policy: IdentificationPolicy) -> Self {
        Self {
            ue_id,
            flight_path_available: false,
            subscription_aerial_authorized: subscription,
            radio_capability_aerial: capability,
            identified_aerial: identify_aerial(subscription, capability, policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FlightPathMessage {
    AvailabilityIndication { available: bool },
    Request,
    Report(FlightPath),
    NoInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    UeToNetwork,
    NetworkToUe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoggedMessage {
    pub direction: Direction,
    pub message: FlightPathMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("no connection established")]
    NotConnected,
}

/// One UE's signalling session. Availability is latched when the connection
/// is set up; changing the UE's flight path afterwards only affects what a
/// later request returns, and the indication refreshes on reconnection.
#[derive(Debug, Clone)]
pub struct Session {
    context: UeContext,
    flight_path: Option<FlightPath>,
    suppress_when_unavailable: bool,
    connected: bool,
    log: Vec<LoggedMessage>,
}

impl Session {
    pub fn new(context: UeContext, flight_path: Option<FlightPath>, suppress_when_unavailable: bool) -> Self {
        Self {
            context,
            flight_path,
            suppress_when_unavailable,
            connected: false,
            log: Vec::new(),
        }
    }

    pub fn context(&self) -> &UeContext {
        &self.context
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn log(&self) -> &[LoggedMessage] {
        &self.log
    }

    fn push(&mut self, direction: Direction, message: FlightPathMessage) {
        self.log.push(LoggedMessage { direction, message });
    }

    /// Connection setup; the UE indicates whether it has a flight path.
    pub fn connect(&mut self) {
        let available = self.flight_path.is_some();
        self.context.flight_path_available = available;
        self.connected = true;
        self.push(Direction::UeToNetwork, FlightPathMessage::AvailabilityIndication { available });
    }

    pub fn disconnect(&mut self) {
        self.connected = false;
    }

    pub fn set_flight_path(&mut self, path: Option<FlightPath>) {
        self.flight_path = path;
    }

    /// Network asks for the flight path. Returns the UE's answer, or `None`
    /// when the request is suppressed because the UE indicated unavailability.
    pub fn request(&mut self) -> Result<Option<FlightPathMessage>, ProtocolError> {
        if !self.connected {
            return Err(ProtocolError::NotConnected);
        }
        if self.suppress_when_unavailable && !self.context.flight_path_available {
            return Ok(None);
        }
        self.push(Direction::NetworkToUe, FlightPathMessage::Request);
        let answer = match &self.flight_path {
            Some(p) => FlightPathMessage::Report(p.clone()),
            None => FlightPathMessage::NoInfo,
        };
        self.push(Direction::UeToNetwork, answer.clone());
        Ok(Some(answer))
    }

    pub fn requests_sent(&self) -> usize {
        self.log
            .iter()
            .filter(|m| m.message == FlightPathMessage::Request)
            .count()
    }
}

/// True when every Report and NoInfo in `log` answers an outstanding Request.
pub fn responses_follow_requests(log: &[LoggedMessage]) -> bool {
    let mut outstanding = 0usize;
    for m in log {
        match m.message {
            FlightPathMessage::Request => outstanding += 1,
            FlightPathMessage::Report(_) | FlightPathMessage::NoInfo => {
                if outstanding == 0 {
                    return false;
                }
                outstanding -= 1;
            }
            FlightPathMessage::AvailabilityIndication { .. } => {}
        }
    }
    true
}

/// Axis-aligned box, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point3,
    pub max: Point3,
}

impl Region {
    pub fn contains(&self, p: Point3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

/// Whether the path's interpolated position is inside `region` at some time
/// in `[t0, t1]` (milliseconds).
pub fn path_enters(path: &FlightPath, region: &Region, t0: f64, t1: f64) -> bool {
    let w = path.waypoints();
    if w.len() == 1 {
        let t = w[0].t_ms as f64;
        return (t0..=t1).contains(&t) && region.contains(w[0].position);
    }
    w.windows(2).any(|seg| {
        let (ta, tb) = (seg[0].t_ms as f64, seg[1].t_ms as f64);
        let (mut lo, mut hi) = (ta.max(t0), tb.min(t1));
        if lo > hi {
            return false;
        }
        let (a, b) = (seg[0].position, seg[1].position);
        let span = tb - ta;
        let axes = [
            (a.x, b.x, region.min.x, region.max.x),
            (a.y, b.y, region.min.y, region.max.y),
            (a.z, b.z, region.min.z, region.max.z),
        ];
        for (pa, pb, min, max) in axes {
            let v = (pb - pa) / span;
            if v == 0.0 {
                if pa < min || pa > max {
                    return false;
                }
                continue;
            }
            let s1 = ta + (min - pa) / v;
            let s2 = ta + (max - pa) / v;
            lo = lo.max(s1.min(s2));
            hi = hi.min(s1.max(s2));
            if lo > hi {
                return false;
            }
        }
        true
    })
}

/// Number of reported paths that enter `region` during `[t0, t1]`.
pub fn paths_per_area(reports: &[FlightPath], region: &Region, window: (f64, f64)) -> usize {
    reports
        .iter()
        .filter(|p| path_enters(p, region, window.0, window.1))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Waypoint;

    fn path(points: &[(f64, f64, f64, u64)]) -> FlightPath {
        FlightPath::new(
            points
                .iter()
                .map(|&(x, y, z, t)| Waypoint {
                    position: Point3::new(x, y, z),
                    t_ms: t,
                })
                .collect(),
        )
        .unwrap()
    }

    fn unit_box() -> Region {
        Region {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(10.0, 10.0, 10.0),
        }
    }

    #[test]
    fn identification_truth_table() {
        use IdentificationPolicy::*;
        assert!(identify_aerial(true, true, And));
        assert!(!identify_aerial(false, true, And));
        assert!(!identify_aerial(true, false, And));
        assert!(!identify_aerial(false, false, And));
        assert!(identify_aerial(true, false, SubscriptionOnly));
        assert!(identify_aerial(false, true, CapabilityOnly));
    }

    #[test]
    fn request_before_connect_is_an_error() {
        let mut s = Session::new(UeContext::new(1, true, true, IdentificationPolicy::And), None, false);
        assert_eq!(s.request(), Err(ProtocolError::NotConnected));
        assert!(s.log().is_empty());
    }

    #[test]
    fn available_path_is_reported() {
        let p = path(&[(0.0, 0.0, 50.0, 0), (100.0, 0.0, 50.0, 1000)]);
        let mut s = Session::new(UeContext::new(1, true, true, IdentificationPolicy::And), Some(p.clone()), true);
        s.connect();
        assert_eq!(s.request().unwrap(), Some(FlightPathMessage::Report(p)));
        assert!(responses_follow_requests(s.log()));
    }

    #[test]
    fn unavailable_path_gets_noinfo_or_is_suppressed() {
        let ctx = UeContext::new(1, true, true, IdentificationPolicy::And);
        let mut s = Session::new(ctx.clone(), None, false);
        s.connect();
        assert_eq!(s.request().unwrap(), Some(FlightPathMessage::NoInfo));

        let mut s = Session::new(ctx, None, true);
        s.connect();
        for _ in 0..5 {
            assert_eq!(s.request().unwrap(), None);
        }
        assert_eq!(s.requests_sent(), 0);
    }

    #[test]
    fn availability_refreshes_on_reconnect() {
        let p = path(&[(0.0, 0.0, 50.0, 0)]);
        let mut s = Session::new(UeContext::new(1, true, true, IdentificationPolicy::And), None, true);
        s.connect();
        s.set_flight_path(Some(p));
        assert_eq!(s.request().unwrap(), None);
        s.disconnect();
        s.connect();
        assert!(matches!(s.request().unwrap(), Some(FlightPathMessage::Report(_))));
    }

    #[test]
    fn log_checker_rejects_unsolicited_report() {
        let log = [LoggedMessage {
            direction: Direction::UeToNetwork,
            message: FlightPathMessage::NoInfo,
        }];
        assert!(!responses_follow_requests(&log));
    }

    #[test]
    fn area_counts() {
        let r = unit_box();
        assert_eq!(paths_per_area(&[], &r, (0.0, 1000.0)), 0);
        let inside = path(&[(1.0, 1.0, 1.0, 0), (9.0, 9.0, 9.0, 100)]);
        let outside = path(&[(20.0, 0.0, 5.0, 0), (20.0, 10.0, 5.0, 100)]);
        // clips the corner x+y <= 12 near (10, 0) .. (0, 10) diagonal shifted
        let corner = path(&[(12.0, 0.0, 5.0, 0), (0.0, 12.0, 5.0, 120)]);
        let near_miss = path(&[(21.0, 0.0, 5.0, 0), (0.0, 21.0, 5.0, 210)]);
        let reports = [inside, outside, corner, near_miss];
        assert_eq!(paths_per_area(&reports, &r, (0.0, 1000.0)), 2);
        // the corner path is inside only between 20 and 100 ms
        assert_eq!(paths_per_area(&reports[2..3], &r, (0.0, 19.0)), 0);
        assert_eq!(paths_per_area(&reports[2..3], &r, (0.0, 20.0)), 1);
    }

    #[test]
    fn stationary_axis_outside_box_misses() {
        let p = path(&[(-1.0, 0.0, 5.0, 0), (-1.0, 10.0, 5.0, 10)]);
        assert!(!path_enters(&p, &unit_box(), 0.0, 10.0));
    }
}
