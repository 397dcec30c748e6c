use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Affordances {
    pub movable: bool,
    pub sliceable: bool,
    pub openable: bool,
    pub toggleable: bool,
    pub receptacle: bool,
    pub fillable: bool,
}

/// What switching an appliance on does to the objects around it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToggleEffect {
    /// Running water: fills and cleans the held object.
    WashHeld,
    /// Toasts everything inside.
    Toast,
    /// Cooks everything inside, transitively.
    Cook,
    /// Fills fillable objects placed directly inside.
    FillContents,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectClass {
    pub name: String,
    #[serde(default)]
    pub affordances: Affordances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_effect: Option<ToggleEffect>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassRegistry {
    classes: BTreeMap<String, ObjectClass>,
}

impl ClassRegistry {
    pub fn new(classes: impl IntoIterator<Item = ObjectClass>) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for c in classes {
            if map.contains_key(&c.name) {
                return Err(format!("duplicate class `{}`", c.name));
            }
            map.insert(c.name.clone(), c);
        }
        let reg = ClassRegistry { classes: map };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (k, c) in &self.classes {
            if k != &c.name {
                return Err(format!("class key `{k}` does not match name `{}`", c.name));
            }
            if c.affordances.openable && !c.affordances.receptacle {
                return Err(format!("openable class `{k}` must be a receptacle"));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ObjectClass> {
        self.classes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.classes.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectClass> + '_ {
        self.classes.values()
    }

    /// The standard kitchen vocabulary used by the generator and fixtures.
    pub fn kitchen() -> Self {
        let a = |f: &str| {
            let mut a = Affordances::default();
            for flag in f.split(',').filter(|s| !s.is_empty()) {
                match flag {
                    "mov" => a.movable = true,
                    "sli" => a.sliceable = true,
                    "ope" => a.openable = true,
                    "tog" => a.toggleable = true,
                    "rec" => a.receptacle = true,
                    "fil" => a.fillable = true,
                    other => unreachable!("bad affordance tag {other}"),
                }
            }
            a
        };
        let c = |name: &str, flags: &str, on_effect: Option<ToggleEffect>| ObjectClass {
            name: name.to_string(),
            affordances: a(flags),
            on_effect,
        };
        use ToggleEffect::*;
        ClassRegistry::new([
            c("CounterTop", "rec", None),
            c("DiningTable", "rec", None),
            c("Fridge", "ope,rec", None),
            c("Cabinet", "ope,rec", None),
            c("Microwave", "ope,rec,tog", Some(Cook)),
            c("StoveBurner", "rec,tog", Some(Cook)),
            c("Toaster", "rec,tog", Some(Toast)),
            c("CoffeeMachine", "rec,tog", Some(FillContents)),
            c("Faucet", "tog", Some(WashHeld)),
            c("Sink", "rec", None),
            c("Plant", "fil", None),
            c("Knife", "mov", None),
            c("Fork", "mov", None),
            c("Spoon", "mov", None),
            c("Bread", "mov,sli", None),
            c("Tomato", "mov,sli", None),
            c("Lettuce", "mov,sli", None),
            c("Potato", "mov,sli", None),
            c("Apple", "mov,sli", None),
            c("Egg", "mov", None),
            c("Mug", "mov,fil", None),
            c("Cup", "mov,fil", None),
            c("Plate", "mov,rec", None),
            c("Bowl", "mov,rec,fil", None),
            c("Pot", "mov,rec,fil", None),
            c("Pan", "mov,rec", None),
        ])
        .expect("kitchen registry is valid")
    }
}
