//! Timestamp normalization to UTC epoch seconds.

use std::sync::LazyLock;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use regex::Regex;

use super::CorpusError;

// "YYYY-MM-DD[ HH:MM:SS][±HH:MM|Z]"; the time and zone parts are optional.
static STAMP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\d{4})-(\d{2})-(\d{2})(?:[ T](\d{2}):(\d{2}):(\d{2}))?(Z|[+-]\d{2}:\d{2})?$",
    )
    .unwrap()
});

/// Parse `raw` into UTC epoch seconds. A missing time means midnight; a
/// missing zone means UTC.
pub fn normalize_timestamp(raw: &str) -> Result<i64, CorpusError> {
    let raw = raw.trim();
    let caps = STAMP
        .captures(raw)
        .ok_or_else(|| CorpusError::UnparseableDate(raw.to_owned()))?;
    let bad = || CorpusError::UnparseableDate(raw.to_owned());
    let num = |i: usize| caps.get(i).map(|m| m.as_str().parse::<u32>().unwrap());

    let date = NaiveDate::from_ymd_opt(
        caps[1].parse::<i32>().map_err(|_| bad())?,
        num(2).unwrap(),
        num(3).unwrap(),
    )
    .ok_or_else(bad)?;
    let time = match (num(4), num(5), num(6)) {
        (Some(h), Some(m), Some(s)) => NaiveTime::from_hms_opt(h, m, s).ok_or_else(bad)?,
        _ => NaiveTime::default(),
    };
    let offset_secs = match caps.get(7).map(|m| m.as_str()) {
        None | Some("Z") => 0i64,
        Some(zone) => {
            let sign = if zone.starts_with('-') { -1 } else { 1 };
            let h: i64 = zone[1..3].parse().map_err(|_| bad())?;
            let m: i64 = zone[4..6].parse().map_err(|_| bad())?;
            sign * (h * 3600 + m * 60)
        }
    };
    Ok(NaiveDateTime::new(date, time).and_utc().timestamp() - offset_secs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent calendar oracle: days-from-civil (Gregorian, proleptic).
    fn oracle_epoch(y: i64, m: i64, d: i64, h: i64, min: i64, s: i64) -> i64 {
        let y = if m <= 2 { y - 1 } else { y };
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        let days = era * 146_097 + doe - 719_468;
        days * 86_400 + h * 3600 + min * 60 + s
    }

    #[test]
    fn matches_calendar_oracle() {
        assert_eq!(oracle_epoch(2020, 7, 25, 12, 2, 41), 1_595_678_561);
        assert_eq!(
            normalize_timestamp("2020-07-25 12:02:41").unwrap(),
            1_595_678_561
        );
        assert_eq!(oracle_epoch(2020, 3, 16, 0, 0, 0), 1_584_316_800);
        assert_eq!(normalize_timestamp("2020-03-16").unwrap(), 1_584_316_800);
    }

    #[test]
    fn epoch_origin() {
        assert_eq!(normalize_timestamp("1970-01-01 00:00:00").unwrap(), 0);
    }

    #[test]
    fn zone_handling() {
        assert_eq!(
            normalize_timestamp("2020-07-25 12:02:41Z").unwrap(),
            1_595_678_561
        );
        // +05:30 local is 5.5h ahead of UTC
        assert_eq!(
            normalize_timestamp("2020-07-25 12:02:41+05:30").unwrap(),
            1_595_678_561 - 19_800
        );
        assert_eq!(
            normalize_timestamp("2020-07-25 12:02:41-02:00").unwrap(),
            1_595_678_561 + 7_200
        );
    }

    #[test]
    fn rejects_other_shapes() {
        for raw in ["", "garbage", "2020/07/25", "2020-13-01", "2020-02-30", "2020-01-01 25:00:00"] {
            assert!(
                matches!(normalize_timestamp(raw), Err(CorpusError::UnparseableDate(_))),
                "{raw:?} should not parse"
            );
        }
    }

    proptest! {
        #[test]
        fn agrees_with_oracle(
            y in 1970i64..2100,
            m in 1i64..=12,
            d in 1i64..=28,
            h in 0i64..24,
            min in 0i64..60,
            s in 0i64..60,
        ) {
            let raw = format!("{y:04}-{m:02}-{d:02} {h:02}:{min:02}:{s:02}");
            prop_assert_eq!(
                normalize_timestamp(&raw).unwrap(),
                oracle_epoch(y, m, d, h, min, s)
            );
        }

        #[test]
        fn monotone_in_lexicographic_order(
            a in (1970i64..2100, 1i64..=12, 1i64..=28, 0i64..24, 0i64..60, 0i64..60),
            b in (1970i64..2100, 1i64..=12, 1i64..=28, 0i64..24, 0i64..60, 0i64..60),
        ) {
            let fmt = |(y, m, d, h, mi, s): (i64, i64, i64, i64, i64, i64)|
                format!("{y:04}-{m:02}-{d:02} {h:02}:{mi:02}:{s:02}");
            let (ra, rb) = (fmt(a), fmt(b));
            let (ea, eb) = (
                normalize_timestamp(&ra).unwrap(),
                normalize_timestamp(&rb).unwrap(),
            );
            if ra < rb {
                prop_assert!(ea < eb);
            } else if ra > rb {
                prop_assert!(ea > eb);
            } else {
                prop_assert_eq!(ea, eb);
            }
        }
    }
}
