use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Predicted closes for horizons `0..=H` made on `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub anchor: NaiveDate,
    pub closes: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub rows: Vec<ForecastRow>,
}

impl Forecast {
    pub fn at(&self, anchor: NaiveDate) -> Option<&ForecastRow> {
        self.rows.iter().find(|r| r.anchor == anchor)
    }
}
