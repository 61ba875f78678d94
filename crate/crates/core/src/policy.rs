//! Security policy evaluation against a capability set.

use std::collections::BTreeSet;

use crate::model::SecurityPolicy;

/// Capability identifiers of the edge-security taxonomy, shipped as the
/// default vocabulary. Policies may use any other identifier as well.
pub const DEFAULT_VOCABULARY: &[&str] = &[
    // virtualisation
    "access_logs",
    "authentication",
    "host_IDS",
    "process_isolation",
    "permission_model",
    "resource_monitoring",
    "restore_points",
    "user_data_isolation",
    // communications
    "certificates",
    "firewall",
    "iot_data_encryption",
    "node_isolation_mechanisms",
    "network_IDS",
    "pki",
    "wireless_security",
    // data
    "backup",
    "encrypted_storage",
    "obfuscated_storage",
    // physical
    "access_control",
    "anti_tampering",
    // other
    "audit",
];

pub fn eval_policy(policy: &SecurityPolicy, caps: &BTreeSet<String>) -> bool {
    match policy {
        SecurityPolicy::Atom(a) => caps.contains(a),
        SecurityPolicy::All(atoms) => atoms.iter().all(|a| caps.contains(a)),
        SecurityPolicy::And(p, q) => eval_policy(p, caps) && eval_policy(q, caps),
        SecurityPolicy::Or(p, q) => eval_policy(p, caps) || eval_policy(q, caps),
    }
}

/// Every atom mentioned by the policy.
pub fn atoms(policy: &SecurityPolicy) -> BTreeSet<&str> {
    fn walk<'a>(p: &'a SecurityPolicy, out: &mut BTreeSet<&'a str>) {
        match p {
            SecurityPolicy::Atom(a) => {
                out.insert(a);
            }
            SecurityPolicy::All(v) => out.extend(v.iter().map(String::as_str)),
            SecurityPolicy::And(a, b) | SecurityPolicy::Or(a, b) => {
                walk(a, out);
                walk(b, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(policy, &mut out);
    out
}
