// Background service worker: owns the context-menu entry and forwards
// clicks to the content script in the originating tab.

const MENU_ID = 'ailp-summarize-link';

function registerContextMenu(): void {
  chrome.contextMenus.removeAll(() => {
    chrome.contextMenus.create({
      id: MENU_ID,
      title: 'AILinkPreviewer: Summarize Link',
      contexts: ['link'],
      documentUrlPatterns: ['https://github.com/*/*/pull/*'],
    });
  });
}

chrome.runtime.onInstalled.addListener(registerContextMenu);
chrome.runtime.onStartup.addListener(registerContextMenu);

chrome.contextMenus.onClicked.addListener((info, tab) => {
  if (info.menuItemId !== MENU_ID || !info.linkUrl || tab?.id === undefined) return;
  void chrome.tabs.sendMessage(tab.id, {
    type: 'ailp-summarize',
    linkUrl: info.linkUrl,
    pageUrl: info.pageUrl ?? tab.url ?? '',
  });
});
