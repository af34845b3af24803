// Preview modal rendered into a shadow root on a dedicated host element, so
// the page's own DOM is never modified beyond appending/removing that host.

import {
  STRATEGY_LABELS,
  Strategy,
  StrategyFailure,
  StrategySuccess,
  SummarizeResponse,
  isStrategySuccess,
} from './lib';

const HOST_ID = 'ailp-preview-host';

const STYLES = `
  .backdrop {
    position: fixed; inset: 0; z-index: 2147483647;
    background: rgba(27, 31, 36, 0.45);
    display: flex; align-items: center; justify-content: center;
    font-family: -apple-system, BlinkMacSystemFont, "Segoe UI", Helvetica, Arial, sans-serif;
  }
  .modal {
    background: #ffffff; color: #1f2328; border-radius: 12px;
    max-width: 640px; width: calc(100% - 48px); max-height: 80vh;
    overflow-y: auto; padding: 16px 20px; box-shadow: 0 8px 24px rgba(0,0,0,0.2);
  }
  .title { font-size: 14px; font-weight: 600; margin: 0 0 4px; }
  .subtitle { font-size: 12px; color: #59636e; margin: 0 0 12px; word-break: break-all; }
  .panel { border: 1px solid #d1d9e0; border-radius: 8px; padding: 10px 12px; margin-bottom: 10px; }
  .panel-label { font-size: 11px; font-weight: 600; color: #59636e; letter-spacing: 0.5px; }
  .panel-text { font-size: 13px; line-height: 1.5; margin: 6px 0 8px; white-space: pre-wrap; }
  .panel-error { font-size: 13px; color: #d1242f; margin: 6px 0 0; }
  .copy { font-size: 12px; border: 1px solid #d1d9e0; border-radius: 6px;
    background: #f6f8fa; padding: 3px 10px; cursor: pointer; }
  .status { font-size: 13px; color: #59636e; margin: 8px 0; }
  .spinner { display: inline-block; width: 14px; height: 14px; border-radius: 50%;
    border: 2px solid #d1d9e0; border-top-color: #0969da; vertical-align: -2px;
    margin-right: 8px; animation: ailp-spin 0.9s linear infinite; }
  @keyframes ailp-spin { to { transform: rotate(360deg); } }
`;

interface ModalState {
  host: HTMLElement;
  shadow: ShadowRoot;
  body: HTMLElement;
  view: Window | null;
  timer: ReturnType<typeof setInterval> | null;
  onDismiss: (() => void) | null;
}

let state: ModalState | null = null;

export function isModalOpen(): boolean {
  return state !== null;
}

export function dismissModal(): void {
  if (!state) return;
  if (state.timer !== null) clearInterval(state.timer);
  state.view?.removeEventListener('keydown', escListener);
  state.onDismiss?.();
  state.host.remove();
  state = null;
}

export function openPendingModal(
  doc: Document,
  linkUrl: string,
  onDismiss?: () => void,
): void {
  dismissModal();
  const host = doc.createElement('div');
  host.id = HOST_ID;
  const shadow = host.attachShadow({ mode: 'open' });

  const style = doc.createElement('style');
  style.textContent = STYLES;
  shadow.appendChild(style);

  const backdrop = doc.createElement('div');
  backdrop.className = 'backdrop';
  const modal = doc.createElement('div');
  modal.className = 'modal';
  const title = doc.createElement('p');
  title.className = 'title';
  title.textContent = 'AILinkPreviewer';
  const subtitle = doc.createElement('p');
  subtitle.className = 'subtitle';
  subtitle.textContent = linkUrl;
  const body = doc.createElement('div');
  modal.append(title, subtitle, body);
  backdrop.appendChild(modal);
  shadow.appendChild(backdrop);

  backdrop.addEventListener('click', (event) => {
    if (event.target === backdrop) dismissModal();
  });
  doc.defaultView?.addEventListener('keydown', escListener);

  (doc.body ?? doc.documentElement).appendChild(host);
  state = {
    host,
    shadow,
    body,
    view: doc.defaultView,
    timer: null,
    onDismiss: onDismiss ?? null,
  };
  renderPending();
}

function escListener(event: KeyboardEvent): void {
  if (event.key === 'Escape') dismissModal();
}

function renderPending(): void {
  if (!state) return;
  const doc = state.host.ownerDocument;
  state.body.replaceChildren();
  const status = doc.createElement('p');
  status.className = 'status';
  const spinner = doc.createElement('span');
  spinner.className = 'spinner';
  const text = doc.createElement('span');
  text.textContent = 'Summarizing…';
  status.append(spinner, text);
  state.body.appendChild(status);

  const startedAt = Date.now();
  state.timer = setInterval(() => {
    const seconds = Math.round((Date.now() - startedAt) / 1000);
    text.textContent = `Summarizing… ${seconds}s`;
  }, 1000);
}

export function renderResults(response: SummarizeResponse, order: Strategy[]): void {
  if (!state) return;
  if (state.timer !== null) {
    clearInterval(state.timer);
    state.timer = null;
  }
  const doc = state.host.ownerDocument;
  state.body.replaceChildren();
  for (const strategy of order) {
    const entry = response.results[strategy];
    if (!entry) continue;
    state.body.appendChild(renderPanel(doc, strategy, entry));
  }
}

export function renderFailure(message: string): void {
  if (!state) return;
  if (state.timer !== null) {
    clearInterval(state.timer);
    state.timer = null;
  }
  const doc = state.host.ownerDocument;
  state.body.replaceChildren();
  const error = doc.createElement('p');
  error.className = 'panel-error';
  error.textContent = message;
  const hint = doc.createElement('p');
  hint.className = 'status';
  hint.textContent =
    'Is the local preview service running? Start it with "ailp serve" and check the service URL in the extension options.';
  state.body.append(error, hint);
}

function renderPanel(
  doc: Document,
  strategy: Strategy,
  entry: StrategySuccess | StrategyFailure,
): HTMLElement {
  const panel = doc.createElement('div');
  panel.className = 'panel';
  panel.dataset.strategy = strategy;
  const label = doc.createElement('div');
  label.className = 'panel-label';
  label.textContent = STRATEGY_LABELS[strategy];
  panel.appendChild(label);
  if (isStrategySuccess(entry)) {
    const text = doc.createElement('p');
    text.className = 'panel-text';
    text.textContent = entry.text;
    const copy = doc.createElement('button');
    copy.className = 'copy';
    copy.textContent = 'Copy';
    copy.addEventListener('click', () => {
      void doc.defaultView?.navigator.clipboard?.writeText(entry.text);
      copy.textContent = 'Copied';
    });
    panel.append(text, copy);
  } else {
    const error = doc.createElement('p');
    error.className = 'panel-error';
    error.textContent = `${entry.error_kind}: ${entry.message}`;
    panel.appendChild(error);
  }
  return panel;
}
