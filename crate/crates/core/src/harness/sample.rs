//! Stratified endpoint selection driven by the diversity score.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::compiler::{ParamLocation, ToolManifest, ToolSpec};

pub const DEFAULT_THRESHOLD: usize = 20;

/// Group key used when a path has no semantic segment.
pub const ROOT_GROUP: &str = "/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub value: u8,
    pub novel_verb: bool,
    pub novel_auth: bool,
    pub novel_param_modality: bool,
}

impl DiversityScore {
    fn new(novel_verb: bool, novel_auth: bool, novel_param_modality: bool) -> Self {
        Self {
            value: novel_verb as u8 + novel_auth as u8 + novel_param_modality as u8,
            novel_verb,
            novel_auth,
            novel_param_modality,
        }
    }
}

/// The three coverage axes of one endpoint (or the union over a group).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axes {
    pub verbs: BTreeSet<String>,
    pub auth: BTreeSet<String>,
    pub modalities: BTreeSet<String>,
}

impl Axes {
    pub fn of(manifest: &ToolManifest, tool: &ToolSpec) -> Self {
        let ep = &tool.endpoint;
        let mut auth: BTreeSet<String> = ep
            .security
            .iter()
            .flatten()
            .map(|id| manifest.scheme(id).map_or("unknown", |s| s.kind_label()).to_string())
            .collect();
        if auth.is_empty() {
            auth.insert("none".into());
        }
        let mut modalities: BTreeSet<String> = ep
            .parameters
            .iter()
            .map(|p| {
                match p.location {
                    ParamLocation::Path => "path",
                    ParamLocation::Query => "query",
                    ParamLocation::Header => "header",
                    ParamLocation::Cookie => "cookie",
                }
                .to_string()
            })
            .collect();
        if ep.request_body.is_some() {
            modalities.insert("body".into());
        }
        if modalities.is_empty() {
            modalities.insert("none".into());
        }
        Self {
            verbs: BTreeSet::from([ep.method.as_str().to_string()]),
            auth,
            modalities,
        }
    }

    fn extend(&mut self, other: &Axes) {
        self.verbs.extend(other.verbs.iter().cloned());
        self.auth.extend(other.auth.iter().cloned());
        self.modalities.extend(other.modalities.iter().cloned());
    }

    /// True when every element of `self` appears in `other`.
    pub fn covered_by(&self, other: &Axes) -> bool {
        self.verbs.is_subset(&other.verbs) && self.auth.is_subset(&other.auth) && self.modalities.is_subset(&other.modalities)
    }

    fn score_against(&self, covered: &Axes) -> (DiversityScore, usize) {
        let nv = self.verbs.difference(&covered.verbs).count();
        let na = self.auth.difference(&covered.auth).count();
        let nm = self.modalities.difference(&covered.modalities).count();
        (DiversityScore::new(nv > 0, na > 0, nm > 0), nv + na + nm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selected {
    pub tool: String,
    /// Score at the moment of selection.
    pub score: DiversityScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleReport {
    pub threshold: usize,
    pub total_tools: usize,
    /// False when the manifest was small enough to take every endpoint.
    pub stratified: bool,
    pub groups: BTreeMap<String, Vec<Selected>>,
    pub total_selected: usize,
    pub coverage_axes: BTreeMap<String, Axes>,
}

impl SampleReport {
    /// Selected tool names in manifest order.
    pub fn selected_tools<'m>(&self, manifest: &'m ToolManifest) -> Vec<&'m ToolSpec> {
        let chosen: BTreeSet<&str> = self.groups.values().flatten().map(|s| s.tool.as_str()).collect();
        manifest.tools.iter().filter(|t| chosen.contains(t.name.as_str())).collect()
    }

    /// Plain-text table of the selection and its axis coverage.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{} of {} endpoints selected ({})\n",
            self.total_selected,
            self.total_tools,
            if self.stratified { "stratified" } else { "exhaustive" }
        );
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        out.push_str(&format!("{:<24} {:>4}  {:<28} {:<28} {}\n", "group", "n", "verbs", "auth", "modalities"));
        for (group, picks) in &self.groups {
            let axes = &self.coverage_axes[group];
            out.push_str(&format!(
                "{:<24} {:>4}  {:<28} {:<28} {}\n",
                group,
                picks.len(),
                join(&axes.verbs),
                join(&axes.auth),
                join(&axes.modalities)
            ));
        }
        out
    }
}

fn is_version_segment(s: &str) -> bool {
    let s = s.to_ascii_lowercase();
    let rest = s.strip_prefix('v').unwrap_or(&s);
    !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit() || c == '.') && rest.starts_with(|c: char| c.is_ascii_digit())
}

/// First path segment that names a resource (`/v2/api/users/{id}` → `/users`).
pub fn resource_group(path: &str) -> String {
    path.split('/')
        .filter(|s| !s.is_empty() && !s.contains('{'))
        .find(|s| !is_version_segment(s) && !matches!(s.to_ascii_lowercase().as_str(), "api" | "rest"))
        .map(|s| format!("/{s}"))
        .unwrap_or_else(|| ROOT_GROUP.to_string())
}

/// Greedy axis cover over one group; `axes` are in document order.
pub fn greedy_cover(axes: &[Axes]) -> Vec<(usize, DiversityScore)> {
    let mut target = Axes::default();
    for a in axes {
        target.extend(a);
    }
    let mut covered = Axes::default();
    let mut picked: Vec<(usize, DiversityScore)> = Vec::new();
    while !target.covered_by(&covered) {
        let best = axes
            .iter()
            .enumerate()
            .filter(|(i, _)| !picked.iter().any(|(p, _)| p == i))
            .map(|(i, a)| {
                let (score, gain) = a.score_against(&covered);
                (i, score, gain)
            })
            // highest score, then most new axis values, then earliest in the document
            .max_by(|(ia, sa, ga), (ib, sb, gb)| sa.value.cmp(&sb.value).then(ga.cmp(gb)).then(ib.cmp(ia)))
            .expect("uncovered axes imply a remaining endpoint");
        covered.extend(&axes[best.0]);
        picked.push((best.0, best.1));
    }
    picked
}

pub fn sample(manifest: &ToolManifest, threshold: usize) -> SampleReport {
    let mut grouped: BTreeMap<String, Vec<(&ToolSpec, Axes)>> = BTreeMap::new();
    for tool in &manifest.tools {
        grouped
            .entry(resource_group(&tool.endpoint.path_template))
            .or_default()
            .push((tool, Axes::of(manifest, tool)));
    }
    let stratified = manifest.tools.len() > threshold;
    let mut groups = BTreeMap::new();
    let mut coverage_axes = BTreeMap::new();
    for (group, members) in grouped {
        let axes: Vec<Axes> = members.iter().map(|(_, a)| a.clone()).collect();
        let picks: Vec<(usize, DiversityScore)> = if stratified {
            greedy_cover(&axes)
        } else {
            let mut covered = Axes::default();
            axes.iter()
                .enumerate()
                .map(|(i, a)| {
                    let s = a.score_against(&covered).0;
                    covered.extend(a);
                    (i, s)
                })
                .collect()
        };
        let mut union = Axes::default();
        for (i, _) in &picks {
            union.extend(&axes[*i]);
        }
        coverage_axes.insert(group.clone(), union);
        groups.insert(
            group,
            picks
                .into_iter()
                .map(|(i, score)| Selected {
                    tool: members[i].0.name.clone(),
                    score,
                })
                .collect(),
        );
    }
    let total_selected = groups.values().map(Vec::len).sum();
    SampleReport {
        threshold,
        total_tools: manifest.tools.len(),
        stratified,
        groups,
        total_selected,
        coverage_axes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes(verb: &str, auth: &[&str], modalities: &[&str]) -> Axes {
        Axes {
            verbs: BTreeSet::from([verb.to_string()]),
            auth: auth.iter().map(|s| s.to_string()).collect(),
            modalities: modalities.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn groups_skip_versions_and_params() {
        assert_eq!(resource_group("/v2/users/{id}"), "/users");
        assert_eq!(resource_group("/api/v1.1/repos"), "/repos");
        assert_eq!(resource_group("/{tenant}/orders"), "/orders");
        assert_eq!(resource_group("/"), "/");
        assert_eq!(resource_group("/v2"), "/");
        assert_eq!(resource_group("/vendors"), "/vendors");
    }

    #[test]
    fn single_endpoint_scores_three() {
        let picks = greedy_cover(&[axes("GET", &["none"], &["none"])]);
        assert_eq!(picks.len(), 1);
        assert_eq!(picks[0].1.value, 3);
    }

    #[test]
    fn covers_both_verbs_and_modalities() {
        let group = [
            axes("GET", &["api_key"], &["path"]),
            axes("GET", &["api_key"], &["path"]),
            axes("POST", &["api_key"], &["query"]),
            axes("GET", &["api_key"], &["query"]),
        ];
        let picks = greedy_cover(&group);
        let idx: Vec<usize> = picks.iter().map(|p| p.0).collect();
        assert_eq!(idx, vec![0, 2]);
        assert_eq!(picks[1].1, DiversityScore::new(true, false, true));
    }
}
