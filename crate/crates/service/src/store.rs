use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use shepherd_core::TraversalSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreError {
    NotFound,
    Expired,
}

struct SessionRecord {
    session: TraversalSession,
    last_activity: DateTime<Utc>,
}

/// In-memory sessions keyed by a random 128-bit hex id. Each record has its
/// own lock, so operations on one session are serialized while distinct
/// sessions proceed independently.
pub struct SessionStore {
    ttl: Duration,
    records: Mutex<HashMap<String, Arc<Mutex<SessionRecord>>>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self { ttl, records: Mutex::new(HashMap::new()) }
    }

    pub fn create(&self, session: TraversalSession, now: DateTime<Utc>) -> String {
        let mut records = self.records.lock().unwrap();
        // Expired records linger (answering E_SESSION_EXPIRED) for one more TTL.
        records.retain(|_, r| now - r.lock().unwrap().last_activity <= self.ttl * 2);
        let record = Arc::new(Mutex::new(SessionRecord { session, last_activity: now }));
        loop {
            let id = hex::encode(rand::random::<[u8; 16]>());
            if !records.contains_key(&id) {
                records.insert(id.clone(), record);
                return id;
            }
        }
    }

    /// Runs `f` under the session's lock and marks it active.
    pub fn with_session<R>(
        &self,
        id: &str,
        now: DateTime<Utc>,
        f: impl FnOnce(&mut TraversalSession) -> R,
    ) -> Result<R, StoreError> {
        let record = self.records.lock().unwrap().get(id).cloned().ok_or(StoreError::NotFound)?;
        let mut record = record.lock().unwrap();
        if now - record.last_activity > self.ttl {
            return Err(StoreError::Expired);
        }
        record.last_activity = now;
        Ok(f(&mut record.session))
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
