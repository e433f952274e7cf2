use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Perceived rating of one aspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubRating {
    Negative,
    Positive,
    Unknown,
}

impl SubRating {
    pub fn as_str(self) -> &'static str {
        match self {
            SubRating::Negative => "negative",
            SubRating::Positive => "positive",
            SubRating::Unknown => "unknown",
        }
    }

    pub fn is_known(self) -> bool {
        self != SubRating::Unknown
    }
}

impl fmt::Display for SubRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubRating {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" => Ok(SubRating::Negative),
            "positive" => Ok(SubRating::Positive),
            "unknown" | "" => Ok(SubRating::Unknown),
            other => Err(format!("unknown sub-rating `{other}`")),
        }
    }
}

pub const ASPECTS: [&str; 4] = ["food", "service", "noise", "ambiance"];

/// Aspect ratings in [`ASPECTS`] order plus the overall star rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratings {
    pub overall: u8,
    pub food: SubRating,
    pub service: SubRating,
    pub noise: SubRating,
    pub ambiance: SubRating,
}

impl Ratings {
    pub fn aspects(&self) -> [SubRating; 4] {
        [self.food, self.service, self.noise, self.ambiance]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub text: String,
    pub ratings: Ratings,
    /// 1 iff the overall rating is at least 3.
    pub label: usize,
    /// 1 iff the food sub-rating is known.
    pub food_mention: usize,
}

impl Review {
    pub fn new(id: impl Into<String>, text: impl Into<String>, ratings: Ratings) -> Result<Self> {
        if !(1..=5).contains(&ratings.overall) {
            return Err(Error::OutOfRange(format!(
                "overall rating {}",
                ratings.overall
            )));
        }
        Ok(Self {
            id: id.into(),
            text: text.into(),
            ratings,
            label: binary_label(ratings.overall),
            food_mention: ratings.food.is_known() as usize,
        })
    }
}

pub fn binary_label(overall: u8) -> usize {
    (overall >= 3) as usize
}

const HEADER: [&str; 7] = [
    "id", "text", "overall", "food", "service", "noise", "ambiance",
];

pub fn read_reviews<R: Read>(reader: R, label: &str) -> Result<Vec<Review>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let pos = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema {
                path: label.to_string(),
                row: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let cols: Vec<usize> = HEADER.iter().map(|h| pos(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let schema = |message: String| Error::Schema {
            path: label.to_string(),
            row,
            message,
        };
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let sub = |k: usize| field(k).parse::<SubRating>().map_err(&schema);
        let overall: u8 = field(2)
            .trim()
            .parse()
            .map_err(|_| schema(format!("cannot parse overall rating `{}`", field(2))))?;
        let ratings = Ratings {
            overall,
            food: sub(3)?,
            service: sub(4)?,
            noise: sub(5)?,
            ambiance: sub(6)?,
        };
        let review = Review::new(field(0), field(1), ratings).map_err(|e| schema(e.to_string()))?;
        out.push(review);
    }
    Ok(out)
}

/// Reads a review CSV with columns `id, text, overall, food, service,
/// noise, ambiance`; extra columns are ignored.
pub fn ingest_reviews(path: impl AsRef<Path>) -> Result<Vec<Review>> {
    let path = path.as_ref();
    read_reviews(File::open(path)?, &path.display().to_string())
}

pub fn write_reviews<W: Write>(writer: W, reviews: &[Review]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in reviews {
        let a = r.ratings;
        w.write_record([
            r.id.as_str(),
            r.text.as_str(),
            &a.overall.to_string(),
            a.food.as_str(),
            a.service.as_str(),
            a.noise.as_str(),
            a.ambiance.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratings(overall: u8, food: SubRating) -> Ratings {
        Ratings {
            overall,
            food,
            service: SubRating::Positive,
            noise: SubRating::Unknown,
            ambiance: SubRating::Negative,
        }
    }

    #[test]
    fn derived_fields() {
        assert_eq!(
            Review::new("a", "", ratings(3, SubRating::Negative))
                .unwrap()
                .label,
            1
        );
        assert_eq!(
            Review::new("a", "", ratings(2, SubRating::Negative))
                .unwrap()
                .label,
            0
        );
        assert_eq!(
            Review::new("a", "", ratings(4, SubRating::Unknown))
                .unwrap()
                .food_mention,
            0
        );
        assert_eq!(
            Review::new("a", "", ratings(4, SubRating::Positive))
                .unwrap()
                .food_mention,
            1
        );
        assert!(Review::new("a", "", ratings(6, SubRating::Positive)).is_err());
    }

    #[test]
    fn round_trip() {
        let reviews = vec![
            Review::new(
                "r1",
                "Great pasta, \"slow\" waiter.\nWould return",
                ratings(4, SubRating::Positive),
            )
            .unwrap(),
            Review::new("r2", "", ratings(1, SubRating::Unknown)).unwrap(),
        ];
        let mut buf = Vec::new();
        write_reviews(&mut buf, &reviews).unwrap();
        assert_eq!(read_reviews(buf.as_slice(), "mem").unwrap(), reviews);
    }

    #[test]
    fn schema_errors_name_the_row() {
        let text = "id,text,overall,food,service,noise,ambiance\na,x,3,positive,unknown,unknown,unknown\nb,y,4,tasty,unknown,unknown,unknown\n";
        match read_reviews(text.as_bytes(), "mem").unwrap_err() {
            Error::Schema { row, .. } => assert_eq!(row, 3),
            e => panic!("{e:?}"),
        }
        assert!(read_reviews("id,text\n".as_bytes(), "mem").is_err());
    }
}
