use std::collections::BTreeMap;

use super::ContractModel;

/// Connected components of the Trigger relation. Members are sorted, and
/// sets are ordered by their smallest member.
pub fn trigger_sets(model: &ContractModel) -> Vec<Vec<String>> {
    let ids: Vec<&String> = model.claims.keys().collect();
    let index: BTreeMap<&String, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for claim in model.claims.values() {
        if let Some(trigger) = &claim.trigger {
            if let (Some(&a), Some(&b)) = (index.get(&claim.id), index.get(trigger)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push((*id).clone());
    }
    // Claim ids are visited in sorted order, so each group is sorted and the
    // smallest root index belongs to the smallest member.
    let mut sets: Vec<Vec<String>> = groups.into_values().collect();
    sets.sort_by(|a, b| a[0].cmp(&b[0]));
    sets
}

/// Number of ways to pick one performed claim per trigger set.
pub fn count_executions(model: &ContractModel) -> u128 {
    trigger_sets(model).iter().map(|s| s.len() as u128).product()
}

/// The untriggered claim of a trigger set, if there is exactly one.
pub fn root_of<'a>(model: &'a ContractModel, set: &[String]) -> Option<&'a str> {
    let mut roots = set.iter().filter(|id| model.claims[*id].trigger.is_none());
    let root = roots.next()?;
    if roots.next().is_some() {
        return None;
    }
    model.claims.get_key_value(root).map(|(id, _)| id.as_str())
}
