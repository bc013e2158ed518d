use std::collections::BTreeSet;

use super::corpus::Event;
use crate::error::{Error, Result};

pub const POSITIVE_THRESHOLD: i64 = 4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImplicitFeedback {
    /// (user, item) pairs with at least one rating at or above the threshold.
    pub positives: BTreeSet<(usize, usize)>,
    /// Binary label of every event, in event order.
    pub labels: Vec<u8>,
}

pub fn label_of(rating: i64) -> u8 {
    u8::from(rating >= POSITIVE_THRESHOLD)
}

/// Converts explicit ratings to implicit feedback.
pub fn to_implicit(events: &[Event]) -> Result<ImplicitFeedback> {
    let mut out = ImplicitFeedback::default();
    for (index, e) in events.iter().enumerate() {
        if !(1..=5).contains(&e.rating) {
            return Err(Error::RatingOutOfRange { index, rating: e.rating });
        }
        let label = label_of(e.rating);
        if label == 1 {
            out.positives.insert((e.user, e.item));
        }
        out.labels.push(label);
    }
    Ok(out)
}
