use std::io::Write;
use std::path::Path;

use super::rollouts::Episode;
use crate::error::{Error, Result};
use crate::mimax::Skill;

/// Writes `episode,t,z,obs_0..,action_0..,reward,score`, one row per step.
pub fn write_trajectories(path: impl AsRef<Path>, episodes: &[Episode]) -> Result<()> {
    let path = path.as_ref();
    let obs_dim = episodes
        .iter()
        .find_map(|e| e.observations.first())
        .map(|o| o.len())
        .unwrap_or(0);
    let act_dim = episodes
        .iter()
        .find_map(|e| e.actions.first())
        .map(|a| a.len())
        .unwrap_or(0);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["episode".to_string(), "t".into(), "z".into()];
    header.extend((0..obs_dim).map(|i| format!("obs_{i}")));
    header.extend((0..act_dim).map(|i| format!("action_{i}")));
    header.extend(["reward".to_string(), "score".into()]);
    w.write_record(&header)?;
    for (k, ep) in episodes.iter().enumerate() {
        let z = ep.skill.to_field();
        for t in 0..ep.observations.len() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(k.to_string());
            rec.push(t.to_string());
            rec.push(z.clone());
            if ep.observations[t].len() != obs_dim || ep.actions[t].len() != act_dim {
                return Err(Error::InvalidArgument(format!(
                    "episode {k} step {t} has a different width"
                )));
            }
            rec.extend(ep.observations[t].iter().map(|x| format!("{x:?}")));
            rec.extend(ep.actions[t].iter().map(|x| format!("{x:?}")));
            rec.push(format!("{:?}", ep.rewards[t]));
            rec.push(format!("{:?}", ep.scores[t]));
            w.write_record(&rec)?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn numbered_columns(header: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(c, name)| {
            name.strip_prefix(prefix)
                .and_then(|n| n.parse::<usize>().ok())
                .map(|n| (n, c))
        })
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, c)| c).collect()
}

/// Reads a trajectory file. Only `episode`, `t`, `z` and `obs_*` are
/// required; actions, rewards and scores default to empty or zero. Rows are
/// grouped by `episode` in first-seen order.
pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<Episode>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = r.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let col_ep =
        find("episode").ok_or_else(|| Error::InvalidArgument(format!("{}: no `episode` column", path.display())))?;
    let col_z = find("z").ok_or_else(|| Error::InvalidArgument(format!("{}: no `z` column", path.display())))?;
    let col_r = find("reward");
    let col_s = find("score");
    let obs_cols = numbered_columns(&header, "obs_");
    let act_cols = numbered_columns(&header, "action_");
    if obs_cols.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: no obs_* columns", path.display())));
    }
    let parse = |rec: &csv::StringRecord, c: usize| -> Result<f64> {
        rec[c]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("{}: bad number `{}`", path.display(), &rec[c])))
    };
    let mut ids: Vec<String> = Vec::new();
    let mut out: Vec<Episode> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec[col_ep].to_string();
        let k = match ids.iter().position(|x| *x == id) {
            Some(k) => k,
            None => {
                ids.push(id);
                out.push(Episode {
                    skill: Skill::from_field(&rec[col_z])?,
                    observations: Vec::new(),
                    actions: Vec::new(),
                    rewards: Vec::new(),
                    scores: Vec::new(),
                });
                out.len() - 1
            }
        };
        let ep = &mut out[k];
        ep.observations
            .push(obs_cols.iter().map(|&c| parse(&rec, c)).collect::<Result<_>>()?);
        ep.actions
            .push(act_cols.iter().map(|&c| parse(&rec, c)).collect::<Result<_>>()?);
        ep.rewards
            .push(col_r.map(|c| parse(&rec, c)).transpose()?.unwrap_or(0.0));
        ep.scores
            .push(col_s.map(|c| parse(&rec, c)).transpose()?.unwrap_or(0.0));
    }
    Ok(out)
}

/// Groups episodes by skill, in first-seen order.
pub fn group_by_skill(episodes: Vec<Episode>) -> Vec<Vec<Episode>> {
    let mut keys: Vec<Skill> = Vec::new();
    let mut groups: Vec<Vec<Episode>> = Vec::new();
    for ep in episodes {
        match keys.iter().position(|k| *k == ep.skill) {
            Some(i) => groups[i].push(ep),
            None => {
                keys.push(ep.skill.clone());
                groups.push(vec![ep]);
            }
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(z: Skill, x0: f64) -> Episode {
        Episode {
            skill: z,
            observations: vec![vec![x0, 0.1], vec![x0 + 0.5, 1e-17]],
            actions: vec![vec![1.0], vec![-0.25]],
            rewards: vec![-1.0, -0.5],
            scores: vec![-1.0, 0.1 + 0.2],
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let eps = vec![
            ep(Skill::Discrete(3), 0.0),
            ep(Skill::Continuous(vec![0.5, -1.0]), 2.0),
            ep(Skill::None, 1.0),
        ];
        write_trajectories(&path, &eps).unwrap();
        let back = read_trajectories(&path).unwrap();
        assert_eq!(back, eps);
        let header = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string();
        assert_eq!(header, "episode,t,z,obs_0,obs_1,action_0,reward,score");
    }

    #[test]
    fn grouping_by_skill() {
        let g = group_by_skill(vec![
            ep(Skill::Discrete(1), 0.0),
            ep(Skill::Discrete(0), 0.0),
            ep(Skill::Discrete(1), 1.0),
        ]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].len(), 2);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_trajectories("/nonexistent/traj.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/traj.csv"));
    }
}
