//! Validity/state index: entries ordered by `t_start` with `(t_end,
//! status)` payloads. A stabbing query binary-searches the last start
//! `<= t` and tests the payload of every earlier entry.

use crate::dates::{Day, End};
use crate::model::{status_visible, Status, View};

#[derive(Debug, Default, Clone)]
pub struct MetadataIndex {
    /// `(t_start, ordinal)`, sorted.
    by_start: Vec<(Day, u32)>,
    t_end: Vec<End>,
    status: Vec<Status>,
}

impl MetadataIndex {
    pub fn len(&self) -> usize {
        self.by_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_start.is_empty()
    }

    /// Inserts or updates the entry of `ord`. Ordinals are dense and
    /// assigned in insertion order; `t_start` of an ordinal never changes.
    pub fn upsert(&mut self, ord: u32, t_start: Day, t_end: End, status: Status) {
        let i = ord as usize;
        if i < self.t_end.len() {
            self.t_end[i] = t_end;
            self.status[i] = status;
            return;
        }
        assert_eq!(i, self.t_end.len(), "ordinals must be dense");
        self.t_end.push(t_end);
        self.status.push(status);
        let pos = self.by_start.partition_point(|e| *e <= (t_start, ord));
        self.by_start.insert(pos, (t_start, ord));
    }

    pub fn status(&self, ord: u32) -> Status {
        self.status[ord as usize]
    }

    /// Ordinals retrievable at `t` under `view`, ascending by `(t_start, ord)`.
    pub fn stab(&self, t: Day, view: View) -> Vec<u32> {
        let upper = self.by_start.partition_point(|(s, _)| *s <= t);
        self.by_start[..upper]
            .iter()
            .filter(|(_, ord)| {
                let i = *ord as usize;
                self.t_end[i].is_after(t) && status_visible(self.status[i], view)
            })
            .map(|(_, ord)| *ord)
            .collect()
    }

    /// Every ordinal whose status is visible in `view`, ignoring time.
    pub fn all_visible(&self, view: View) -> Vec<u32> {
        (0..self.status.len() as u32).filter(|&o| status_visible(self.status[o as usize], view)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::day;

    #[test]
    fn stabbing_query() {
        let mut m = MetadataIndex::default();
        assert!(m.stab(day("2020-01-01"), View::Active).is_empty());
        m.upsert(0, day("2019-01-01"), End::At(day("2020-01-01")), Status::Active);
        m.upsert(1, day("2020-01-01"), End::Open, Status::Active);
        m.upsert(2, day("2019-01-01"), End::Open, Status::Deprecated);
        let t = day("2020-06-01");
        assert_eq!(m.stab(t, View::Active), vec![1]);
        m.upsert(3, day("2019-01-01"), End::Open, Status::Contested);
        let mut both = m.stab(t, View::ActivePlusContested);
        both.sort();
        assert_eq!(both, vec![1, 3]);
        // status update is reflected immediately
        m.upsert(1, day("2020-01-01"), End::Open, Status::Deprecated);
        assert!(m.stab(t, View::Active).is_empty());
        assert_eq!(m.stab(day("2019-12-31"), View::Active), vec![0]);
    }
}
