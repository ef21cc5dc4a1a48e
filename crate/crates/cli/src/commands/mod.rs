pub mod annotate;
pub mod audit;
pub mod filter;
pub mod judge;
pub mod merge;
pub mod pack;
pub mod report;

use crate::config::PipelineConfig;
use anyhow::{bail, Context};
use dapt_core::gateway::{Gateway, GatewayConfig, HttpTransport, RetryPolicy};
use std::time::Duration;

/// Builds the HTTP gateway from the config; annotate/judge/audit all need a
/// reachable endpoint and a model name.
pub fn build_gateway(config: &PipelineConfig) -> anyhow::Result<Gateway<HttpTransport>> {
    let Some(base_url) = &config.gateway.base_url else {
        bail!("gateway.base_url is not configured (set it in the config file)");
    };
    let Some(model) = &config.gateway.model else {
        bail!("gateway.model is not configured (set it in the config file)");
    };
    let transport = HttpTransport::new(
        base_url,
        config.gateway.api_key.clone(),
        Duration::from_secs(config.gateway.timeout_secs),
    )
    .context("building HTTP transport")?;
    let gateway = Gateway::new(
        transport,
        GatewayConfig {
            model: model.clone(),
            concurrency: config.gateway.concurrency,
            retry: RetryPolicy {
                max_retries: config.gateway.max_retries,
                base_delay_ms: config.gateway.retry_base_ms,
                max_delay_ms: config.gateway.retry_max_ms,
            },
        },
    )?;
    Ok(gateway)
}
