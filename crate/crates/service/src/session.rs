//! Builds a [`Studio`] for a workspace: provider, clock and template corpus.

use std::sync::Arc;

use storyloom_core::provider::ModelProvider;
use storyloom_core::template::TemplateCorpus;
use storyloom_core::workspace::{Clock, LogicalClock, ProviderMode, SystemClock};
use storyloom_core::{MockProvider, Pipeline, Studio, Workspace};

use crate::config::ProviderConfig;
use crate::http_provider::HttpProvider;

#[derive(Clone)]
pub struct SessionFactory {
    pub config: ProviderConfig,
    pub corpus: Option<Arc<TemplateCorpus>>,
    /// Overrides the workspace seed for the mock provider.
    pub mock_seed: Option<u64>,
}

impl SessionFactory {
    pub fn new(config: ProviderConfig) -> Self {
        SessionFactory {
            config,
            corpus: None,
            mock_seed: None,
        }
    }

    pub fn uses_mock(&self, workspace: &Workspace) -> bool {
        self.config.mode == ProviderMode::Mock || workspace.settings.provider_mode == ProviderMode::Mock
    }

    pub fn provider(&self, workspace: &Workspace) -> Arc<dyn ModelProvider> {
        if self.uses_mock(workspace) {
            let seed = self.mock_seed.or(workspace.settings.seed).unwrap_or(0);
            Arc::new(MockProvider::new(seed))
        } else {
            Arc::new(HttpProvider::new(self.config.clone()))
        }
    }

    /// Seeded workspaces get a logical clock so that replays are byte-stable.
    pub fn clock(workspace: &Workspace) -> Box<dyn Clock> {
        if workspace.settings.seed.is_some() {
            Box::new(LogicalClock::after(workspace))
        } else {
            Box::new(SystemClock)
        }
    }

    pub fn open(&self, workspace: Workspace, actor: &str) -> Studio {
        let mut pipeline = Pipeline::new(self.provider(&workspace));
        if let Some(corpus) = &self.corpus {
            pipeline = pipeline.with_corpus(corpus.clone());
        }
        let clock = Self::clock(&workspace);
        Studio::new(workspace, pipeline, clock).with_actor(actor)
    }
}
