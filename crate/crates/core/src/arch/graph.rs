use std::collections::{BTreeMap, HashMap, HashSet};

use super::{ArchError, LayerOp, LayerSpec, TensorShape};

/// A named DAG of layers with a declared input shape.
///
/// The `batch` of `input_shape` is only a default; analyses take the batch
/// size explicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub name: String,
    pub input_shape: TensorShape,
    pub layers: Vec<LayerSpec>,
    pub metadata: BTreeMap<String, String>,
}

impl Architecture {
    pub fn new(name: impl Into<String>, input_shape: TensorShape, layers: Vec<LayerSpec>) -> Self {
        Architecture {
            name: name.into(),
            input_shape,
            layers,
            metadata: BTreeMap::new(),
        }
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut LayerSpec> {
        self.layers.iter_mut().find(|l| l.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn input_layer(&self) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| matches!(l.op, LayerOp::Input))
    }

    /// Names of the layers that consume `name`, in declaration order.
    pub fn successors(&self, name: &str) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| l.inputs.iter().any(|i| i == name))
            .map(|l| l.name.as_str())
            .collect()
    }

    /// Layers nobody consumes.
    pub fn sinks(&self) -> Vec<&str> {
        let consumed: HashSet<&str> = self
            .layers
            .iter()
            .flat_map(|l| l.inputs.iter().map(String::as_str))
            .collect();
        self.layers
            .iter()
            .filter(|l| !consumed.contains(l.name.as_str()))
            .map(|l| l.name.as_str())
            .collect()
    }

    /// Checks every structural invariant and returns layer indices in a
    /// topological order. Ties are broken by declaration order, so the order
    /// is deterministic and equals declaration order for already-sorted
    /// layer lists.
    pub fn validate(&self) -> Result<Vec<usize>, ArchError> {
        self.input_shape.validate()?;

        let mut index: HashMap<&str, usize> = HashMap::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.name.is_empty() {
                return Err(ArchError::InvalidLayer {
                    layer: format!("#{i}"),
                    reason: "layer name must not be empty".into(),
                });
            }
            if index.insert(layer.name.as_str(), i).is_some() {
                return Err(ArchError::DuplicateLayer(layer.name.clone()));
            }
        }

        let inputs: Vec<&LayerSpec> = self
            .layers
            .iter()
            .filter(|l| matches!(l.op, LayerOp::Input))
            .collect();
        match inputs.len() {
            0 => return Err(ArchError::NoInput),
            1 => {}
            _ => {
                return Err(ArchError::MultipleInputs(
                    inputs.iter().map(|l| l.name.clone()).collect(),
                ))
            }
        }

        for layer in &self.layers {
            layer.validate_params()?;
            for pred in &layer.inputs {
                if !index.contains_key(pred.as_str()) {
                    return Err(ArchError::UnknownPredecessor {
                        layer: layer.name.clone(),
                        predecessor: pred.clone(),
                    });
                }
            }
        }

        let order = self.topological_order(&index)?;

        // Reachability from the input layer.
        let start = index[inputs[0].name.as_str()];
        let mut reached = vec![false; self.layers.len()];
        reached[start] = true;
        for &i in &order {
            if i != start
                && self.layers[i]
                    .inputs
                    .iter()
                    .any(|p| reached[index[p.as_str()]])
            {
                reached[i] = true;
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(ArchError::Unreachable(self.layers[i].name.clone()));
        }
        Ok(order)
    }

    fn topological_order(&self, index: &HashMap<&str, usize>) -> Result<Vec<usize>, ArchError> {
        let n = self.layers.len();
        let mut indegree = vec![0usize; n];
        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, layer) in self.layers.iter().enumerate() {
            for pred in &layer.inputs {
                let p = index[pred.as_str()];
                indegree[i] += 1;
                consumers[p].push(i);
            }
        }
        // Kahn's algorithm, always emitting the lowest ready index.
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &consumers[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() < n {
            return Err(ArchError::Cycle(self.find_cycle(index, &indegree)));
        }
        Ok(order)
    }

    /// Walks predecessor edges among the layers left over by Kahn's
    /// algorithm until a layer repeats.
    fn find_cycle(&self, index: &HashMap<&str, usize>, indegree: &[usize]) -> Vec<String> {
        let Some(mut cur) = indegree.iter().position(|&d| d > 0) else {
            return Vec::new();
        };
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut path = Vec::new();
        loop {
            if let Some(&at) = seen.get(&cur) {
                let mut cycle: Vec<String> = path[at..]
                    .iter()
                    .map(|&i: &usize| self.layers[i].name.clone())
                    .collect();
                cycle.reverse();
                return cycle;
            }
            seen.insert(cur, path.len());
            path.push(cur);
            cur = self.layers[cur]
                .inputs
                .iter()
                .map(|p| index[p.as_str()])
                .find(|&p| indegree[p] > 0)
                .expect("a layer left with positive indegree has a cyclic predecessor");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Architecture {
        Architecture::new(
            "tiny",
            TensorShape::new(1, 3, 8, 8).unwrap(),
            vec![
                LayerSpec::input("data"),
                LayerSpec::conv("a", "data", 4, 3, 1, 1),
                LayerSpec::conv("b", "a", 4, 1, 1, 0),
            ],
        )
    }

    #[test]
    fn valid_chain_orders_in_declaration_order() {
        assert_eq!(tiny().validate().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn out_of_order_declaration_is_sorted() {
        let mut arch = tiny();
        arch.layers.swap(1, 2);
        let order = arch.validate().unwrap();
        let names: Vec<&str> = order
            .iter()
            .map(|&i| arch.layers[i].name.as_str())
            .collect();
        assert_eq!(names, ["data", "a", "b"]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut arch = tiny();
        arch.layers[2].name = "a".into();
        assert_eq!(arch.validate(), Err(ArchError::DuplicateLayer("a".into())));
    }

    #[test]
    fn cycle_reported_with_members() {
        let mut arch = tiny();
        arch.layers[1].inputs = vec!["b".into()];
        match arch.validate() {
            Err(ArchError::Cycle(members)) => {
                let mut m = members.clone();
                m.sort();
                assert_eq!(m, ["a", "b"]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn missing_and_multiple_inputs() {
        let mut arch = tiny();
        arch.layers.remove(0);
        arch.layers[0].inputs = vec!["b".into()];
        assert!(arch.validate().is_err());

        let mut arch = tiny();
        arch.layers.push(LayerSpec::input("data2"));
        assert!(matches!(arch.validate(), Err(ArchError::MultipleInputs(_))));
    }

    #[test]
    fn unknown_predecessor() {
        let mut arch = tiny();
        arch.layers[2].inputs = vec!["nope".into()];
        assert!(matches!(
            arch.validate(),
            Err(ArchError::UnknownPredecessor { .. })
        ));
    }

    #[test]
    fn sinks_and_successors() {
        let arch = tiny();
        assert_eq!(arch.sinks(), ["b"]);
        assert_eq!(arch.successors("a"), ["b"]);
    }
}
