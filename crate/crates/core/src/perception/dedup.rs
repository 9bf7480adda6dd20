use serde::{Deserialize, Serialize};

use super::ObjectProposal;
use crate::provider::{HttpClient, HttpProviderConfig, MatchRequest, ProviderError};
use crate::seeding::derive_seed;

/// Decides whether two detections show the same physical instance.
pub trait InstanceMatcher: Send + Sync {
    fn same_instance(&self, a: &ObjectProposal, b: &ObjectProposal) -> Result<bool, ProviderError>;
}

/// Compares ground-truth entity ids. Proposals without one never match.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleMatcher;

impl InstanceMatcher for OracleMatcher {
    fn same_instance(&self, a: &ObjectProposal, b: &ObjectProposal) -> Result<bool, ProviderError> {
        Ok(matches!((&a.truth, &b.truth), (Some(x), Some(y)) if x == y))
    }
}

/// Oracle answer flipped with fixed error rates. The flip is a pure function
/// of the unordered pair, so the matcher is symmetric and repeatable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedMatcher {
    pub seed: u64,
    /// Probability that two different instances are declared the same.
    pub false_match_rate: f64,
    /// Probability that two views of one instance are declared different.
    pub false_split_rate: f64,
}

fn pair_key(p: &ObjectProposal) -> String {
    let pose = p.source_view.pose;
    format!(
        "{}|{}|{:.9}|{:.9}|{:.9}",
        p.truth.as_deref().unwrap_or("-"),
        p.source_view.node_id,
        pose.heading(),
        pose.fov(),
        p.bbox.cx
    )
}

impl InstanceMatcher for SimulatedMatcher {
    fn same_instance(&self, a: &ObjectProposal, b: &ObjectProposal) -> Result<bool, ProviderError> {
        let truth = OracleMatcher.same_instance(a, b)?;
        let (ka, kb) = (pair_key(a), pair_key(b));
        let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
        let u = derive_seed(self.seed, &[&lo, &hi]) as f64 / u64::MAX as f64;
        let rate = if truth {
            self.false_split_rate
        } else {
            self.false_match_rate
        };
        Ok(if u < rate { !truth } else { truth })
    }
}

/// Matcher backed by the `/match` endpoint. Ground truth is stripped before
/// proposals leave the process.
#[derive(Debug, Clone)]
pub struct HttpMatcher {
    client: HttpClient,
}

impl HttpMatcher {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }
}

fn wire(p: &ObjectProposal) -> serde_json::Value {
    let mut p = p.clone();
    p.truth = None;
    serde_json::to_value(&p).expect("proposal serializes")
}

impl InstanceMatcher for HttpMatcher {
    fn same_instance(&self, a: &ObjectProposal, b: &ObjectProposal) -> Result<bool, ProviderError> {
        Ok(self
            .client
            .match_pair(&MatchRequest {
                a: wire(a),
                b: wire(b),
            })?
            .is_match)
    }
}

/// Indices into the deduplicated input; the first member is the
/// representative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionGroup {
    pub members: Vec<usize>,
}

impl DetectionGroup {
    pub fn representative(&self) -> usize {
        self.members[0]
    }
}

/// Greedy clustering: each detection joins the first group whose
/// representative the matcher accepts, otherwise it founds a new group.
pub fn deduplicate(
    detections: &[ObjectProposal],
    matcher: &dyn InstanceMatcher,
) -> Result<Vec<DetectionGroup>, ProviderError> {
    let mut groups: Vec<DetectionGroup> = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        let mut joined = false;
        for g in groups.iter_mut() {
            if matcher.same_instance(&detections[g.representative()], d)? {
                g.members.push(i);
                joined = true;
                break;
            }
        }
        if !joined {
            groups.push(DetectionGroup { members: vec![i] });
        }
    }
    Ok(groups)
}
