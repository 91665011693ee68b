//! Per-epoch training record, written as CSV.

use std::io::{Read, Write};

use crate::error::{contract, Error, Result};

pub const LOG_HEADER: [&str; 5] = ["epoch", "train_loss", "val_mae", "lr_sr", "lr_nuc"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation MAE, °C.
    pub val_mae: f64,
    /// Learning rates used during the epoch.
    pub lr_sr: f64,
    pub lr_nuc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    rows: Vec<LogRow>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("train log: {e}"))
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Append the next epoch; epochs count from 1 without gaps.
    pub fn push(&mut self, row: LogRow) -> Result<()> {
        if row.epoch != self.rows.len() + 1 {
            return Err(contract(format!("log row for epoch {} after {} rows", row.epoch, self.rows.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_mae.to_string(),
                r.lr_sr.to_string(),
                r.lr_nuc.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        if !r.headers().map_err(csv_err)?.iter().eq(LOG_HEADER) {
            return Err(Error::Format(format!("train log header must be {}", LOG_HEADER.join(","))));
        }
        let mut log = Self::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::Format(format!("bad number `{}` in train log", &rec[i])))
            };
            let epoch = rec[0].parse().map_err(|_| Error::Format(format!("bad epoch `{}`", &rec[0])))?;
            log.push(LogRow { epoch, train_loss: num(1)?, val_mae: num(2)?, lr_sr: num(3)?, lr_nuc: num(4)? })
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut log = TrainLog::new();
        for e in 1..=3 {
            log.push(LogRow { epoch: e, train_loss: 1.0 / e as f64, val_mae: 0.3, lr_sr: 1e-4, lr_nuc: 4e-5 }).unwrap();
        }
        let text = log.to_csv_string();
        assert!(text.starts_with("epoch,train_loss,val_mae,lr_sr,lr_nuc\n"));
        assert_eq!(TrainLog::read_csv(text.as_bytes()).unwrap(), log);
        assert!(log.push(LogRow { epoch: 7, ..*log.last().unwrap() }).is_err());
    }
}
