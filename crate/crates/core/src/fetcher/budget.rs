/// Burst/pause request budget on a microsecond clock.
///
/// Up to `burst` requests are admitted. Once all of them have completed the
/// budget stays closed for `pause`, then a new burst starts. Idle time does
/// not refill a partially used burst.
#[derive(Clone, Debug)]
pub struct BurstBudget {
    burst: u32,
    pause: u64,
    admitted: u32,
    in_flight: u32,
    resume_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Admission {
    Granted,
    /// Closed until the given time.
    RetryAt(u64),
    /// Burst used up; the pause starts after the in-flight requests finish.
    AwaitCompletions,
}

impl BurstBudget {
    pub fn new(burst: u32, pause_micros: u64) -> Self {
        assert!(burst >= 1, "burst must be at least 1");
        BurstBudget { burst, pause: pause_micros, admitted: 0, in_flight: 0, resume_at: 0 }
    }

    pub fn try_admit(&mut self, now: u64) -> Admission {
        if now < self.resume_at {
            return Admission::RetryAt(self.resume_at);
        }
        if self.admitted >= self.burst {
            return Admission::AwaitCompletions;
        }
        self.admitted += 1;
        self.in_flight += 1;
        Admission::Granted
    }

    /// Records a finished request; returns the pause end if this completion started a pause.
    pub fn complete(&mut self, now: u64) -> Option<u64> {
        assert!(self.in_flight > 0, "completion without admission");
        self.in_flight -= 1;
        if self.admitted >= self.burst && self.in_flight == 0 {
            self.admitted = 0;
            self.resume_at = now + self.pause;
            return Some(self.resume_at);
        }
        None
    }

    pub fn in_flight(&self) -> u32 {
        self.in_flight
    }

    pub fn admitted_in_burst(&self) -> u32 {
        self.admitted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_pause() {
        let mut b = BurstBudget::new(2, 100);
        assert_eq!(b.try_admit(0), Admission::Granted);
        assert_eq!(b.try_admit(0), Admission::Granted);
        assert_eq!(b.try_admit(0), Admission::AwaitCompletions);
        assert_eq!(b.complete(5), None);
        assert_eq!(b.complete(10), Some(110));
        assert_eq!(b.try_admit(50), Admission::RetryAt(110));
        assert_eq!(b.try_admit(110), Admission::Granted);
    }

    #[test]
    fn idle_time_does_not_refill() {
        let mut b = BurstBudget::new(2, 100);
        assert_eq!(b.try_admit(0), Admission::Granted);
        b.complete(1);
        assert_eq!(b.try_admit(1_000_000), Admission::Granted);
        assert_eq!(b.try_admit(1_000_000), Admission::AwaitCompletions);
    }
}
