//! Initial access and AP selection.
//!
//! UEs join the network one by one and compete for serving APs. Each AP can
//! serve at most `tau_p` UEs (one per pilot), so a UE that tries to join a
//! full AP triggers a competition that evicts the weakest contender. A UE
//! that has lost at all but one AP becomes *protected*: it is force-assigned
//! the remaining AP and can no longer be evicted, which keeps weak UEs from
//! being abandoned.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which APs serve which UEs, produced by initial access.
///
/// The three set views are kept consistent: `ap_sets[k]` (the M_k sets)
/// lists the APs serving UE k, `ue_sets[l]` (D_l) the UEs served by AP l,
/// and `partial_sets[k]` (P_k) the UEs sharing at least one serving AP with
/// UE k, including k itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMap {
    pub num_aps: usize,
    pub num_ues: usize,
    pub tau_p: usize,
    pub ap_sets: Vec<Vec<usize>>,
    pub ue_sets: Vec<Vec<usize>>,
    pub partial_sets: Vec<Vec<usize>>,
    #[serde(skip)]
    serving: Vec<bool>,
}

impl ServiceMap {
    fn from_sets(
        num_aps: usize,
        num_ues: usize,
        tau_p: usize,
        ap_sets: Vec<Vec<usize>>,
    ) -> Self {
        let mut serving = vec![false; num_aps * num_ues];
        let mut ue_sets = vec![Vec::new(); num_aps];
        for (k, aps) in ap_sets.iter().enumerate() {
            for &l in aps {
                serving[l * num_ues + k] = true;
                ue_sets[l].push(k);
            }
        }
        for d in &mut ue_sets {
            d.sort_unstable();
        }
        let mut map = Self {
            num_aps,
            num_ues,
            tau_p,
            ap_sets,
            ue_sets,
            partial_sets: Vec::new(),
            serving,
        };
        map.partial_sets = derive_interferer_sets(&map);
        map
    }

    /// True when AP `ap` serves UE `ue` (the A matrix entry).
    #[inline]
    pub fn serves(&self, ap: usize, ue: usize) -> bool {
        self.serving[ap * self.num_ues + ue]
    }

    /// Column of the A matrix for one UE, as a binary vector over APs.
    pub fn serving_column(&self, ue: usize) -> Vec<bool> {
        (0..self.num_aps).map(|l| self.serves(l, ue)).collect()
    }

    /// Checks every structural invariant; used by tests and after access.
    pub fn validate(&self) -> Result<()> {
        for (l, d) in self.ue_sets.iter().enumerate() {
            if d.len() > self.tau_p {
                return Err(Error::InvalidConfig(format!(
                    "AP {l} serves {} UEs, beyond tau_p = {}",
                    d.len(),
                    self.tau_p
                )));
            }
        }
        for (k, m) in self.ap_sets.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::EmptyServingSet(k));
            }
            let bound = (self.tau_p - 1) * m.len() + 1;
            if self.partial_sets[k].len() > bound {
                return Err(Error::InvalidConfig(format!(
                    "|P_{k}| = {} exceeds (tau_p - 1)|M_{k}| + 1 = {bound}",
                    self.partial_sets[k].len()
                )));
            }
            for &l in m {
                if !self.serves(l, k) {
                    return Err(Error::InvalidConfig("inconsistent serving sets".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ServiceMap =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(Self::from_sets(raw.num_aps, raw.num_ues, raw.tau_p, raw.ap_sets))
    }
}

/// P_k = UEs sharing at least one serving AP with UE k (k included).
pub fn derive_interferer_sets(map: &ServiceMap) -> Vec<Vec<usize>> {
    (0..map.num_ues)
        .map(|k| {
            let mut seen = vec![false; map.num_ues];
            seen[k] = true;
            for &l in &map.ap_sets[k] {
                for &i in &map.ue_sets[l] {
                    seen[i] = true;
                }
            }
            (0..map.num_ues).filter(|&i| seen[i]).collect()
        })
        .collect()
}

/// Competitive initial access over the gain matrix `beta` (row-major
/// `[ue * num_aps + ap]`). Errors on instances whose total pilot capacity
/// cannot hold every UE.
pub fn initial_access(
    beta: &[f64],
    num_ues: usize,
    num_aps: usize,
    tau_p: usize,
) -> Result<ServiceMap> {
    assert_eq!(beta.len(), num_ues * num_aps);
    if num_ues == 0 || num_aps == 0 || tau_p == 0 {
        return Err(Error::InvalidConfig(
            "access needs at least one UE, one AP and one pilot".into(),
        ));
    }
    if num_ues > num_aps * tau_p {
        return Err(Error::InfeasibleAccess {
            ues: num_ues,
            aps: num_aps,
            tau_p,
        });
    }
    let map = run_access(beta, num_ues, num_aps, tau_p)?;
    for (k, m) in map.ap_sets.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::EmptyServingSet(k));
        }
    }
    Ok(map)
}

struct AccessState<'a> {
    beta: &'a [f64],
    num_aps: usize,
    tau_p: usize,
    in_m: Vec<bool>, // [k * L + l]
    in_b: Vec<bool>, // [k * L + l]
    blacklisted: Vec<usize>,
    protected: Vec<bool>,
    served_by: Vec<Vec<usize>>, // D_l
}

impl AccessState<'_> {
    #[inline]
    fn gain(&self, ue: usize, ap: usize) -> f64 {
        self.beta[ue * self.num_aps + ap]
    }

    fn available(&self, ue: usize) -> Option<usize> {
        (0..self.num_aps)
            .find(|&l| !self.in_m[ue * self.num_aps + l] && !self.in_b[ue * self.num_aps + l])
    }

    /// Strongest available AP; ties go to the lowest index.
    fn best_available(&self, ue: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for l in 0..self.num_aps {
            let idx = ue * self.num_aps + l;
            if self.in_m[idx] || self.in_b[idx] {
                continue;
            }
            let g = self.gain(ue, l);
            if best.map_or(true, |(_, bg)| g > bg) {
                best = Some((l, g));
            }
        }
        best.map(|(l, _)| l)
    }

    /// Weakest non-protected UE currently in D_l; ties to the lowest index.
    fn weakest_evictable(&self, ap: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &i in &self.served_by[ap] {
            if self.protected[i] {
                continue;
            }
            let g = self.gain(i, ap);
            if best.map_or(true, |(_, bg)| g < bg) {
                best = Some((i, g));
            }
        }
        best.map(|(i, _)| i)
    }

    fn insert(&mut self, ue: usize, ap: usize) {
        self.in_m[ue * self.num_aps + ap] = true;
        self.served_by[ap].push(ue);
    }

    fn serving_count(&self, ue: usize) -> usize {
        self.in_m[ue * self.num_aps..(ue + 1) * self.num_aps]
            .iter()
            .filter(|&&m| m)
            .count()
    }

    fn evict(&mut self, ue: usize, ap: usize) {
        self.in_m[ue * self.num_aps + ap] = false;
        self.served_by[ap].retain(|&i| i != ue);
    }

    /// Records a lost competition at `ap` and promotes the loser to the
    /// protected list once its blacklist reaches L - 1. A loser that cannot
    /// afford to blacklist anything (only possible when L = 1) is promoted
    /// without blacklisting, so the AP stays reachable for its forced
    /// assignment. Returns whether the loser was promoted.
    fn record_loss(&mut self, loser: usize, ap: usize) -> bool {
        if self.blacklisted[loser] >= self.num_aps - 1 {
            self.protected[loser] = true;
            return true;
        }
        self.in_b[loser * self.num_aps + ap] = true;
        self.blacklisted[loser] += 1;
        if self.blacklisted[loser] == self.num_aps - 1 {
            self.protected[loser] = true;
            return true;
        }
        false
    }

    /// Assigns a protected UE an AP, evicting the weakest evictable
    /// incumbent when the AP is full. Returns a victim whose serving set
    /// ended up empty and therefore has to re-compete.
    fn force_assign(&mut self, ue: usize, ap: usize) -> Result<Option<usize>> {
        self.insert(ue, ap);
        if self.served_by[ap].len() > self.tau_p {
            let victim = self
                .weakest_evictable(ap)
                .ok_or(Error::ProtectedCapacityConflict { ap })?;
            self.evict(victim, ap);
            if self.serving_count(victim) == 0 {
                return Ok(Some(victim));
            }
        }
        Ok(None)
    }
}

/// The raw selection procedure, without the feasibility and coverage checks
/// of [`initial_access`].
fn run_access(beta: &[f64], num_ues: usize, num_aps: usize, tau_p: usize) -> Result<ServiceMap> {
    let mut st = AccessState {
        beta,
        num_aps,
        tau_p,
        in_m: vec![false; num_ues * num_aps],
        in_b: vec![false; num_ues * num_aps],
        blacklisted: vec![0; num_ues],
        protected: vec![false; num_ues],
        served_by: vec![Vec::new(); num_aps],
    };

    // UEs join in ascending index order. On feasible instances a UE whose
    // last AP was taken by a forced assignment re-competes from the queue;
    // on infeasible ones (capacity exceeded) such UEs stay unserved.
    let feasible = num_ues <= num_aps * tau_p;
    let mut queue: Vec<usize> = (0..num_ues).rev().collect();
    while let Some(k) = queue.pop() {
        loop {
            if st.protected[k] {
                if let Some(l) = st.available(k) {
                    if let Some(victim) = st.force_assign(k, l)? {
                        if feasible {
                            queue.push(victim);
                        }
                    }
                }
                break;
            }
            let Some(l) = st.best_available(k) else {
                break;
            };
            st.insert(k, l);
            if st.served_by[l].len() > tau_p {
                // Competition: the weakest non-protected contender loses.
                let loser = st
                    .weakest_evictable(l)
                    .expect("contender k is never protected here");
                st.evict(loser, l);
                let promoted = st.record_loss(loser, l);
                if loser != k {
                    if promoted {
                        // A finished UE was promoted: rerun its forced
                        // assignment right away if it lost its only AP.
                        if let Some(lp) = st.available(loser) {
                            if let Some(victim) = st.force_assign(loser, lp)? {
                                if feasible {
                                    queue.push(victim);
                                }
                            }
                        }
                    } else if feasible && st.serving_count(loser) == 0 {
                        // A finished UE emptied by this loss still has
                        // unblacklisted APs (earlier forced evictions do not
                        // blacklist); let it re-compete.
                        queue.push(loser);
                    }
                }
            }
        }
    }

    let ap_sets: Vec<Vec<usize>> = (0..num_ues)
        .map(|k| {
            (0..num_aps)
                .filter(|&l| st.in_m[k * num_aps + l])
                .collect()
        })
        .collect();
    Ok(ServiceMap::from_sets(num_aps, num_ues, tau_p, ap_sets))
}

/// Benchmark selection: each AP independently serves its `tau_p` strongest
/// UEs. Coverage is not guaranteed.
pub fn strongest_ue_access(
    beta: &[f64],
    num_ues: usize,
    num_aps: usize,
    tau_p: usize,
) -> ServiceMap {
    let mut ap_sets = vec![Vec::new(); num_ues];
    for l in 0..num_aps {
        let mut ues: Vec<usize> = (0..num_ues).collect();
        ues.sort_by(|&a, &b| {
            beta[b * num_aps + l]
                .partial_cmp(&beta[a * num_aps + l])
                .unwrap()
                .then(a.cmp(&b))
        });
        for &k in ues.iter().take(tau_p) {
            ap_sets[k].push(l);
        }
    }
    ServiceMap::from_sets(num_aps, num_ues, tau_p, ap_sets)
}
