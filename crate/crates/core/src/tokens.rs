//! Output vocabulary: special tokens plus one token per grid coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Point2;

pub const PAD: u32 = 0;
pub const SOS: u32 = 1;
pub const EOS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Token {
    Pad,
    Sos,
    Eos,
    X(f64),
    Y(f64),
}

/// Ids are dense: PAD, SOS, EOS, then sorted x coordinates, then sorted y coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct TokenVocab {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    x_coords: Vec<f64>,
    y_coords: Vec<f64>,
}

impl TryFrom<VocabRepr> for TokenVocab {
    type Error = crate::Error;

    fn try_from(r: VocabRepr) -> Result<Self> {
        Self::new(r.x_coords, r.y_coords)
    }
}

impl From<TokenVocab> for VocabRepr {
    fn from(v: TokenVocab) -> Self {
        Self {
            x_coords: v.xs,
            y_coords: v.ys,
        }
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return invalid("coordinates must be finite");
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

impl TokenVocab {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Ok(Self {
            xs: sorted_unique(xs)?,
            ys: sorted_unique(ys)?,
        })
    }

    pub fn from_points(points: &[Point2]) -> Result<Self> {
        Self::new(
            points.iter().map(|p| p.x).collect(),
            points.iter().map(|p| p.y).collect(),
        )
    }

    pub fn len(&self) -> usize {
        3 + self.xs.len() + self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_id(&self, x: f64) -> Option<u32> {
        self.xs.iter().position(|&v| v == x).map(|i| 3 + i as u32)
    }

    pub fn y_id(&self, y: f64) -> Option<u32> {
        self.ys
            .iter()
            .position(|&v| v == y)
            .map(|i| (3 + self.xs.len() + i) as u32)
    }

    pub fn token(&self, id: u32) -> Option<Token> {
        let id = id as usize;
        match id {
            0 => Some(Token::Pad),
            1 => Some(Token::Sos),
            2 => Some(Token::Eos),
            _ if id < 3 + self.xs.len() => Some(Token::X(self.xs[id - 3])),
            _ if id < self.len() => Some(Token::Y(self.ys[id - 3 - self.xs.len()])),
            _ => None,
        }
    }

    /// Label sequence for a set of people: SOS, (x, y) pairs sorted by (x, y), EOS.
    pub fn encode_people(&self, people: &[Point2]) -> Result<TokenSequence> {
        let mut sorted = people.to_vec();
        sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        let mut ids = Vec::with_capacity(2 * sorted.len() + 2);
        ids.push(SOS);
        for p in sorted {
            match (self.x_id(p.x), self.y_id(p.y)) {
                (Some(x), Some(y)) => ids.extend([x, y]),
                _ => return invalid(format!("({}, {}) not in the vocabulary", p.x, p.y)),
            }
        }
        ids.push(EOS);
        Ok(TokenSequence(ids))
    }

    /// Points encoded by a well-formed sequence, `None` if malformed.
    pub fn decode_people(&self, seq: &TokenSequence) -> Option<Vec<Point2>> {
        let body = seq.body()?;
        if body.len() % 2 != 0 {
            return None;
        }
        body.chunks(2)
            .map(|pair| match (self.token(pair[0])?, self.token(pair[1])?) {
                (Token::X(x), Token::Y(y)) => Some(Point2::new(x, y)),
                _ => None,
            })
            .collect()
    }
}

/// Token ids including the leading SOS and trailing EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Tokens strictly between SOS and the first EOS, if both are present.
    pub fn body(&self) -> Option<&[u32]> {
        let (first, rest) = self.0.split_first()?;
        if *first != SOS {
            return None;
        }
        let end = rest.iter().position(|&t| t == EOS)?;
        if end + 2 != self.0.len() {
            return None;
        }
        Some(&rest[..end])
    }

    /// Number of people the sequence claims: body length / 2, `None` if malformed.
    pub fn people_count(&self) -> Option<usize> {
        let body = self.body()?;
        (body.len() % 2 == 0).then_some(body.len() / 2)
    }
}
