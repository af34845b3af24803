// Content script on GitHub PR pages: remembers the last right-clicked
// anchor, and on a context-menu command resolves its location, calls the
// local service, and renders the preview modal. One request in flight per
// tab; a new request aborts the previous one.

import {
  DEFAULT_SETTINGS,
  ExtensionSettings,
  buildSummarizeRequest,
  normalizeSettings,
  postSummarize,
  resolveLinkLocation,
} from './lib';
import { dismissModal, openPendingModal, renderFailure, renderResults } from './modal';

let lastAnchor: HTMLAnchorElement | null = null;
let inFlight: AbortController | null = null;

document.addEventListener(
  'contextmenu',
  (event) => {
    const target = event.target as Element | null;
    lastAnchor = (target?.closest('a[href]') as HTMLAnchorElement | null) ?? null;
  },
  true,
);

async function loadSettings(): Promise<ExtensionSettings> {
  try {
    const stored = await chrome.storage.sync.get('settings');
    return normalizeSettings(stored.settings);
  } catch {
    return DEFAULT_SETTINGS;
  }
}

async function handleSummarize(linkUrl: string, pageUrl: string): Promise<void> {
  const settings = await loadSettings();
  const anchor = lastAnchor;
  const resolved = anchor ? resolveLinkLocation(anchor) : null;
  inFlight?.abort();
  const controller = new AbortController();
  inFlight = controller;
  openPendingModal(document, linkUrl, () => controller.abort());
  if (!resolved) {
    renderFailure(
      'This link is outside the PR description, comments, and review comments, so there is no context to summarize.',
    );
    return;
  }
  const strategies = settings.showComparison
    ? settings.defaultStrategies
    : settings.defaultStrategies.slice(0, 1);
  const request = buildSummarizeRequest(linkUrl, pageUrl, resolved, strategies);
  if (!request) {
    renderFailure('Could not determine the pull request this page belongs to.');
    return;
  }
  try {
    const response = await postSummarize(settings, request, controller.signal);
    renderResults(response, request.strategies);
  } catch (error) {
    if (!controller.signal.aborted) {
      renderFailure(error instanceof Error ? error.message : String(error));
    }
  } finally {
    if (inFlight === controller) inFlight = null;
  }
}

chrome.runtime.onMessage.addListener((message) => {
  if (message?.type === 'ailp-summarize' && typeof message.linkUrl === 'string') {
    void handleSummarize(message.linkUrl, message.pageUrl ?? window.location.href);
  }
});

window.addEventListener('pagehide', dismissModal);
